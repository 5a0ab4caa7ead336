"""Damped fixed-point solver for q*."""
import logging
import math
import os
import sys
from dataclasses import dataclass

import numpy as np
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from errors import NoConvergence
from models import ModelSpec
from numerics import expect_field_gaussian, gh_standard_normal

logger = logging.getLogger(__name__)

DAMPING = 0.7
DEFAULT_GH_ORDER = 60


@dataclass(frozen=True)
class FixedPointResult:
    q: float
    iterations: int
    residual: float


def tanh_sq(x):
    return np.tanh(x) ** 2


def q_map(model: ModelSpec, q: float, gh_order: int = DEFAULT_GH_ORDER) -> float:
    """f(q) = E tanh²(𝖧 + √(q R̄′(1−q)) 𝖦)."""
    nodes, weights = model.field.quadrature()
    if q <= 0.0:
        sigma = 0.0
    else:
        sigma = math.sqrt(q * model.transforms.r_prime(1.0 - q))
    return expect_field_gaussian(nodes, weights, sigma, tanh_sq, gh_standard_normal(gh_order))


def warn_if_outside_regime(model: ModelSpec) -> None:
    limit = 0.5 * min(1.0, model.spectral.cauchy_at_support_max())
    if model.beta > limit:
        logger.warning(
            "beta=%.4g exceeds 0.5*min(1, G(d+))=%.4g; high-temperature guarantees may not apply",
            model.beta, limit,
        )


def _iterate(model: ModelSpec, q0: float, tol: float, max_iter: int, gh_order: int) -> FixedPointResult:
    q = q0
    fq = q_map(model, q, gh_order)
    residual = abs(fq - q)
    previous = residual
    for iteration in range(1, max_iter + 1):
        if residual <= tol:
            return FixedPointResult(q=q, iterations=iteration - 1, residual=residual)
        q = (1.0 - DAMPING) * q + DAMPING * fq
        fq = q_map(model, q, gh_order)
        residual = abs(fq - q)
        if residual > previous and residual > tol:
            logger.warning("damped q iteration not monotone at step %d: %.3g > %.3g",
                           iteration, residual, previous)
        previous = residual
    if residual <= tol:
        return FixedPointResult(q=q, iterations=max_iter, residual=residual)
    raise NoConvergence(
        f"q* iteration did not reach tol={tol:g} in {max_iter} steps "
        f"(beta={model.beta} may lie outside the contraction regime)",
        residual=residual,
        last_iterate=q,
    )


def solve_q_star_detailed(
    model: ModelSpec,
    tol: float = 1e-12,
    max_iter: int = 10_000,
    gh_order: int = DEFAULT_GH_ORDER,
    second_start: bool = True,
) -> FixedPointResult:
    """Solve q = f(q) from q₀ = E tanh²(𝖧), optionally confirming from a second start."""
    if tol < 1e-14:
        raise ValueError(f"tol must be >= 1e-14, got {tol}")
    warn_if_outside_regime(model)

    q0 = model.field.expect(tanh_sq)
    result = _iterate(model, q0, tol, max_iter, gh_order)
    logger.debug("q*=%.15g after %d iterations (residual %.3g)", result.q, result.iterations, result.residual)

    if second_start:
        alt = 0.5 * (1.0 + q0) if q0 < 0.5 else 0.5 * q0
        try:
            other = _iterate(model, alt, tol, max_iter, gh_order)
            if abs(other.q - result.q) > 1e-6:
                logger.warning("q* depends on the start: %.10g from %.4g vs %.10g from %.4g",
                               result.q, q0, other.q, alt)
        except NoConvergence as e:
            logger.warning("second q* start %.4g did not converge (residual %.3g)", alt, e.residual)
    return result


def solve_q_star(model: ModelSpec, tol: float = 1e-12, max_iter: int = 10_000,
                 gh_order: int = DEFAULT_GH_ORDER) -> float:
    return solve_q_star_detailed(model, tol, max_iter, gh_order).q
