"""Finite-n spherical free energy from its one-dimensional dual."""
import logging
import os
import sys
from typing import Dict

import numpy as np
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from errors import DomainError
from models import CouplingSample, ModelSpec
from numerics import minimize_convex_1d

logger = logging.getLogger(__name__)

SPHERE_EPSILON = 1e-6


def _spherical_objective(d_bar: np.ndarray, projected_sq: np.ndarray):
    def fun(gamma: float) -> float:
        gap = gamma - d_bar
        return float(gamma + np.sum(projected_sq / gap) - np.mean(np.log(gap)) - 1.0)

    def grad(gamma: float) -> float:
        gap = gamma - d_bar
        return float(1.0 - np.sum(projected_sq / gap ** 2) - np.mean(1.0 / gap))

    def hess(gamma: float) -> float:
        gap = gamma - d_bar
        return float(2.0 * np.sum(projected_sq / gap ** 3) + np.mean(1.0 / gap ** 2))

    return fun, grad, hess


def spherical_finite_n_detailed(sample: CouplingSample, model: ModelSpec) -> Dict[str, float]:
    if sample.n < 2:
        raise DomainError(f"n must be >= 2, got {sample.n}")
    d_bar = model.beta * np.asarray(sample.d, dtype=float)
    projected_sq = (sample.o @ sample.h) ** 2 / sample.n
    fun, grad, hess = _spherical_objective(d_bar, projected_sq)

    lo = float(d_bar.max()) + SPHERE_EPSILON
    hi = lo + 1.0 + float(np.sum(projected_sq))
    minimum = minimize_convex_1d(fun, grad, lo, hi, hess=hess, method="bisect")
    if minimum.boundary:
        logger.info("spherical minimum sits on gamma = d+ + eps (n=%d seed=%d)", sample.n, sample.seed)
    return {
        "n": sample.n,
        "seed": sample.seed,
        "gamma": minimum.x,
        "value": 0.5 * minimum.value,
        "boundary": minimum.boundary,
    }


def spherical_finite_n(sample: CouplingSample, model: ModelSpec) -> float:
    """½ inf_γ [γ + n⁻¹Σ(Oh)_i²/(γ−β d_i) − n⁻¹Σ log(γ−β d_i) − 1]."""
    return spherical_finite_n_detailed(sample, model)["value"]
