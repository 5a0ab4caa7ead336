"""Closed forms of inf_γ 𝓗 (scalar and 2×2) with numeric cross-checks."""
import logging
import os
import sys
from typing import Dict

import numpy as np
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from errors import DomainError
from numerics import ConvexMinimum, minimize_convex_1d
from .functionals import LawLike, as_transforms, h_func, h_func_grad
from .hciz import Rank2Objective, feasible_start, minimize_rank2

logger = logging.getLogger(__name__)

SCALAR_TOLERANCE = 1e-8
MATRIX_TOLERANCE = 1e-6


def _interior_floor(d_plus: float) -> float:
    return d_plus + 1e-9 * (1.0 + abs(d_plus))


def inf_gamma_numeric(alpha: float, law: LawLike) -> ConvexMinimum:
    """Direct minimization of γ ↦ 𝓗(γ, α) over γ > d₊."""
    transforms = as_transforms(law)
    lo = _interior_floor(transforms.d_plus)
    return minimize_convex_1d(
        lambda g: h_func(g, alpha, transforms),
        lambda g: h_func_grad(g, alpha, transforms)[0],
        lo,
        lo + 1.0 / alpha + 1.0,
        hess=lambda g: -float(transforms.cauchy_prime(g)),
        method="golden",
    )


def inf_gamma_closed(alpha: float, law: LawLike, crosscheck: bool = True) -> float:
    """inf_γ 𝓗(γ, α) = ∫₀^α R(z)dz, attained at γ = G⁻¹(α)."""
    transforms = as_transforms(law)
    if not transforms.in_range(alpha):
        raise DomainError(f"alpha={alpha} outside (0, G(d+)={transforms.g_at_dplus})")
    value = transforms.integral_r(alpha)
    if crosscheck:
        numeric = inf_gamma_numeric(alpha, transforms)
        if abs(numeric.value - value) > SCALAR_TOLERANCE:
            logger.warning("closed-form inf %.12g and numeric inf %.12g differ at alpha=%.6g",
                           value, numeric.value, alpha)
    return value


def inf_gamma_minimizer(alpha: float, law: LawLike) -> float:
    """G⁻¹(α) = R(α) + 1/α."""
    return as_transforms(law).cauchy_inverse(alpha)


def _check_matrix_argument(matrix: np.ndarray, transforms) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (2, 2) or not np.allclose(matrix, matrix.T, atol=1e-14):
        raise DomainError(f"expected a symmetric 2x2 matrix, got {matrix.tolist()}")
    eigenvalues = np.linalg.eigvalsh(matrix)
    if not (eigenvalues[0] > 0 and eigenvalues[1] < transforms.g_at_dplus):
        raise DomainError(
            f"eigenvalues {eigenvalues.tolist()} must lie in (0, G(d+)={transforms.g_at_dplus})"
        )
    return matrix


def inf_gamma_matrix_detailed(matrix, law: LawLike) -> Dict:
    """Tr f(A) with f(α) = ∫₀^α R and the minimizer G⁻¹(A) = R(A) + A⁻¹."""
    transforms = as_transforms(law)
    matrix = _check_matrix_argument(matrix, transforms)
    eigenvalues, vectors = np.linalg.eigh(matrix)
    value = float(sum(transforms.integral_r(e) for e in eigenvalues))
    minimizer = vectors @ np.diag([transforms.cauchy_inverse(e) for e in eigenvalues]) @ vectors.T
    return {"value": value, "minimizer": minimizer, "eigenvalues": eigenvalues}


def inf_gamma_matrix(matrix, law: LawLike, crosscheck: bool = True) -> float:
    detailed = inf_gamma_matrix_detailed(matrix, law)
    if crosscheck:
        numeric = inf_gamma_matrix_numeric(matrix, law)
        if abs(numeric["value"] - detailed["value"]) > MATRIX_TOLERANCE:
            logger.warning("matrix closed form %.10g and numeric inf %.10g differ",
                           detailed["value"], numeric["value"])
    return detailed["value"]


def inf_gamma_matrix_numeric(matrix, law: LawLike) -> Dict:
    """Three-parameter Newton minimization over {Λ ≻ d₊I} on the law's quadrature."""
    transforms = as_transforms(law)
    matrix = _check_matrix_argument(matrix, transforms)
    nodes, weights = transforms.quadrature()
    objective = Rank2Objective(matrix, nodes, weights)
    floor = _interior_floor(transforms.d_plus)
    return minimize_rank2(objective, floor, feasible_start(matrix, floor))
