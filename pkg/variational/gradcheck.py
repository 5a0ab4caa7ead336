"""Central finite differences with Richardson extrapolation against analytic gradients."""
import logging
import os
import sys
from typing import Callable, Sequence

import numpy as np
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from models import GradcheckReport

logger = logging.getLogger(__name__)


def central_difference(fun: Callable[[np.ndarray], float], x: np.ndarray, step: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    result = np.empty_like(x)
    for i in range(len(x)):
        offset = np.zeros_like(x)
        offset[i] = step * max(1.0, abs(x[i]))
        result[i] = (fun(x + offset) - fun(x - offset)) / (2.0 * offset[i])
    return result


def gradcheck(
    fun: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x,
    step: float = 1e-3,
    tolerance: float = 1e-5,
) -> GradcheckReport:
    """Compare ``grad(x)`` with finite differences at step, step/2 and step/4.

    Two Richardson estimates (4D(h/2) − D(h))/3 and (4D(h/4) − D(h/2))/3 must
    agree to ``tolerance``; the finer one is the reference for the relative error.
    """
    x = np.asarray(x, dtype=float)
    steps = [step, step / 2.0, step / 4.0]
    coarse, middle, fine = (central_difference(fun, x, h) for h in steps)
    first = (4.0 * middle - coarse) / 3.0
    second = (4.0 * fine - middle) / 3.0
    analytic = np.asarray(grad(x), dtype=float)

    scale = np.maximum(1.0, np.abs(analytic))
    max_rel_error = float(np.max(np.abs(analytic - second) / scale))
    consistent = bool(np.max(np.abs(first - second) / scale) <= tolerance)
    if max_rel_error > tolerance:
        logger.warning("gradient check failed: max relative error %.3g", max_rel_error)
    return GradcheckReport(
        analytic=analytic,
        numeric=second,
        steps=list(steps),
        max_rel_error=max_rel_error,
        richardson_consistent=consistent,
    )


def gradcheck_components(report: GradcheckReport, names: Sequence[str]) -> dict:
    errors = np.abs(report.analytic - report.numeric) / np.maximum(1.0, np.abs(report.analytic))
    return {name: float(error) for name, error in zip(names, errors)}
