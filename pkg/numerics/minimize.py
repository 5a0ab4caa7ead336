"""One-dimensional solvers for monotone equations and convex objectives."""
import logging
import os
import sys
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import optimize
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from errors import DomainError, NoConvergence

logger = logging.getLogger(__name__)

_MAX_EXPANSIONS = 80


@dataclass(frozen=True)
class ConvexMinimum:
    """Result of a 1-D convex minimization on [lo, hi]."""

    x: float
    value: float
    derivative: float
    second_derivative: Optional[float]
    boundary: bool
    upper_bound: float


def solve_monotone_decreasing(
    func: Callable[[float], float],
    target: float,
    lower: float,
    upper_guess: float,
    fprime: Optional[Callable[[float], float]] = None,
    xtol: float = 1e-8,
    newton_steps: int = 5,
) -> float:
    """Solve func(x) = target on (lower, ∞) for strictly decreasing func.

    Brackets by halving the offset from ``lower`` until func exceeds target and
    by doubling ``upper_guess`` until func drops below it, bisects to ``xtol``
    and then polishes with Newton steps when ``fprime`` is given.
    """
    offset = max(upper_guess - lower, 1.0)
    left = lower + offset
    for _ in range(_MAX_EXPANSIONS):
        if func(left) > target:
            break
        offset *= 0.5
        left = lower + offset
    else:
        raise DomainError(f"target {target} not reached above {lower}")

    right = max(upper_guess, left)
    for _ in range(_MAX_EXPANSIONS):
        if func(right) < target:
            break
        right = left + 2.0 * (right - left) + 1.0
    else:
        raise DomainError(f"target {target} not reached below {right}")

    root = optimize.bisect(
        lambda x: func(x) - target,
        left,
        right,
        xtol=xtol * max(1.0, abs(left)),
        maxiter=500,
    )
    if fprime is None:
        return float(root)

    x = root
    for _ in range(newton_steps):
        slope = fprime(x)
        if slope == 0.0 or not np.isfinite(slope):
            break
        step = (func(x) - target) / slope
        candidate = x - step
        if not (left <= candidate <= right):
            break
        x = candidate
        if abs(step) <= 4.0 * np.finfo(float).eps * abs(x):
            break
    return float(x)


def minimize_convex_1d(
    fun: Callable[[float], float],
    grad: Callable[[float], float],
    lo: float,
    hi: float,
    hess: Optional[Callable[[float], float]] = None,
    method: str = "golden",
    xtol: float = 1e-12,
    newton_steps: int = 8,
) -> ConvexMinimum:
    """Minimize a smooth strictly convex function on [lo, ∞).

    ``hi`` is expanded until the derivative is positive, so the returned
    minimizer never sits on an artificial upper bound. ``method="golden"`` runs
    a bounded golden-section/Brent search followed by Newton polish on the
    derivative; ``method="bisect"`` bisects the derivative directly.
    """
    if grad(lo) >= 0.0:
        return ConvexMinimum(
            x=float(lo),
            value=float(fun(lo)),
            derivative=float(grad(lo)),
            second_derivative=float(hess(lo)) if hess else None,
            boundary=True,
            upper_bound=float(hi),
        )

    for _ in range(_MAX_EXPANSIONS):
        if grad(hi) > 0.0:
            break
        hi = lo + 2.0 * (hi - lo)
    else:
        raise NoConvergence(f"derivative never turned positive up to {hi}", residual=grad(hi))

    if method == "bisect":
        x = optimize.brentq(grad, lo, hi, xtol=xtol, rtol=4.0 * np.finfo(float).eps, maxiter=500)
    elif method == "golden":
        result = optimize.minimize_scalar(
            fun, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10, "maxiter": 500}
        )
        x = float(result.x)
        a, b = lo, hi
        for _ in range(newton_steps):
            g = grad(x)
            if g > 0:
                b = min(b, x)
            else:
                a = max(a, x)
            curvature = hess(x) if hess is not None else _numeric_slope(grad, x, a, b)
            if curvature <= 0 or not np.isfinite(curvature):
                break
            candidate = x - g / curvature
            if not (a < candidate < b):
                candidate = 0.5 * (a + b)
            if abs(candidate - x) <= xtol * max(1.0, abs(x)):
                x = candidate
                break
            x = candidate
    else:
        raise ValueError(f"Unknown method: {method}")

    logger.debug("convex minimum at %.12g on [%.6g, %.6g]", x, lo, hi)
    return ConvexMinimum(
        x=float(x),
        value=float(fun(x)),
        derivative=float(grad(x)),
        second_derivative=float(hess(x)) if hess else None,
        boundary=False,
        upper_bound=float(hi),
    )


def _numeric_slope(grad: Callable[[float], float], x: float, a: float, b: float) -> float:
    h = 1e-6 * max(1.0, abs(x))
    h = min(h, 0.5 * (x - a), 0.5 * (b - x)) if b > a else h
    if h <= 0:
        return float("nan")
    return (grad(x + h) - grad(x - h)) / (2.0 * h)
