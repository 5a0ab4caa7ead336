"""Scalar and 2×2 versions of the 𝓗 and 𝓕 functionals over μ_D̄."""
import logging
import os
import sys
from typing import Tuple, Union

import numpy as np
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from errors import DomainError
from models import ModelSpec, RSConstants
from spectral_law import SpectralLaw, TransformCache, transform_cache

logger = logging.getLogger(__name__)

LawLike = Union[SpectralLaw, TransformCache]

# ∂Λ/∂(γ, ν, ρ) for Λ = [[γ, ν], [ν, ρ]]
BASIS = np.array([
    [[1.0, 0.0], [0.0, 0.0]],
    [[0.0, 1.0], [1.0, 0.0]],
    [[0.0, 0.0], [0.0, 1.0]],
])


def as_transforms(law: LawLike) -> TransformCache:
    return law if isinstance(law, TransformCache) else transform_cache(law)


def sym2(gamma: float, nu: float, rho: float) -> np.ndarray:
    return np.array([[gamma, nu], [nu, rho]], dtype=float)


def _check_scalar(gamma: float, transforms: TransformCache) -> None:
    if not gamma > transforms.d_plus:
        raise DomainError(f"gamma={gamma} must exceed d+={transforms.d_plus}")


def _check_matrix(lam: np.ndarray, d_plus: float) -> None:
    lowest = float(np.linalg.eigvalsh(lam)[0])
    if not lowest > d_plus:
        raise DomainError(f"smallest eigenvalue {lowest} of Lambda must exceed d+={d_plus}")


def h_func(gamma: float, alpha: float, law: LawLike) -> float:
    """𝓗(γ, α) = γα − ∫log(γ−x)dμ − (1 + log α)."""
    transforms = as_transforms(law)
    _check_scalar(gamma, transforms)
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    return float(gamma * alpha - transforms.log_potential(gamma) - (1.0 + np.log(alpha)))


def h_func_grad(gamma: float, alpha: float, law: LawLike) -> Tuple[float, float]:
    """(∂_γ𝓗, ∂_α𝓗) = (α − G(γ), γ − 1/α)."""
    transforms = as_transforms(law)
    _check_scalar(gamma, transforms)
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    return float(alpha - transforms.cauchy(gamma)), float(gamma - 1.0 / alpha)


def f_weight(x, constants: RSConstants):
    """(x + (a*/κ*)(1 − 1/((1−q*)(λ*−x))))²."""
    ratio = constants.a_star / constants.kappa_star
    return (x + ratio * (1.0 - 1.0 / (constants.one_minus_q * (constants.lambda_star - x)))) ** 2


def f_weight_sup(model: ModelSpec, constants: RSConstants) -> float:
    nodes, _ = model.transforms.quadrature()
    grid = np.concatenate([nodes, [model.transforms.law.support_min, model.d_bar_plus]])
    return float(np.max(f_weight(grid, constants)))


def f_func(gamma: float, model: ModelSpec, constants: RSConstants) -> float:
    """𝓕(γ) = ∫ f_weight(x)/(γ−x) dμ_D̄."""
    transforms = model.transforms
    _check_scalar(gamma, transforms)
    nodes, weights = transforms.quadrature()
    return float(weights @ (f_weight(nodes, constants) / (gamma - nodes)))


def f_func_prime(gamma: float, model: ModelSpec, constants: RSConstants) -> float:
    transforms = model.transforms
    _check_scalar(gamma, transforms)
    nodes, weights = transforms.quadrature()
    return float(-weights @ (f_weight(nodes, constants) / (gamma - nodes) ** 2))


def _resolvents(lam: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """(Λ − x I)⁻¹ for every node, shape (N, 2, 2)."""
    shifted = lam[None, :, :] - nodes[:, None, None] * np.eye(2)[None, :, :]
    det = shifted[:, 0, 0] * shifted[:, 1, 1] - shifted[:, 0, 1] ** 2
    inverse = np.empty_like(shifted)
    inverse[:, 0, 0] = shifted[:, 1, 1]
    inverse[:, 1, 1] = shifted[:, 0, 0]
    inverse[:, 0, 1] = -shifted[:, 0, 1]
    inverse[:, 1, 0] = -shifted[:, 1, 0]
    return inverse / det[:, None, None]


def f2_func(gamma: float, nu: float, rho: float, model: ModelSpec, constants: RSConstants) -> np.ndarray:
    """∫ (Λ − x)⁻¹ f_weight(x) dμ_D̄ for Λ = [[γ, ν], [ν, ρ]]."""
    lam = sym2(gamma, nu, rho)
    _check_matrix(lam, model.d_bar_plus)
    nodes, weights = model.transforms.quadrature()
    resolvents = _resolvents(lam, nodes)
    return np.einsum("n,nij->ij", weights * f_weight(nodes, constants), resolvents)


def f2_func_grad(gamma: float, nu: float, rho: float, model: ModelSpec, constants: RSConstants) -> np.ndarray:
    """∂𝓕/∂(γ, ν, ρ), shape (3, 2, 2), from ∂(Λ−x)⁻¹ = −(Λ−x)⁻¹ E (Λ−x)⁻¹."""
    lam = sym2(gamma, nu, rho)
    _check_matrix(lam, model.d_bar_plus)
    nodes, weights = model.transforms.quadrature()
    resolvents = _resolvents(lam, nodes)
    scaled = weights * f_weight(nodes, constants)
    return -np.einsum("n,nij,ajk,nkl->ail", scaled, resolvents, BASIS, resolvents)


def _check_gram(gram: np.ndarray) -> float:
    det = float(np.linalg.det(gram))
    if not (gram[0, 0] > 0 and det > 0):
        raise DomainError(f"matrix {gram.tolist()} is not positive definite")
    return det


def h2_func(gamma: float, nu: float, rho: float, a: float, b: float, c: float, law: LawLike) -> float:
    """Tr ΛA − ∫log det(Λ−x)dμ − (2 + log det A)."""
    transforms = as_transforms(law)
    lam = sym2(gamma, nu, rho)
    _check_matrix(lam, transforms.d_plus)
    gram = sym2(a, b, c)
    det_a = _check_gram(gram)
    eigenvalues = np.linalg.eigvalsh(lam)
    log_det = float(sum(transforms.log_potential(e) for e in eigenvalues))
    return float(np.trace(lam @ gram) - log_det - (2.0 + np.log(det_a)))


def h2_func_grad(gamma: float, nu: float, rho: float, a: float, b: float, c: float,
                 law: LawLike) -> np.ndarray:
    """Partials of h2_func in (γ, ν, ρ, a, b, c)."""
    transforms = as_transforms(law)
    lam = sym2(gamma, nu, rho)
    _check_matrix(lam, transforms.d_plus)
    det_a = _check_gram(sym2(a, b, c))
    eigenvalues, vectors = np.linalg.eigh(lam)
    # ∫(Λ−x)⁻¹dμ by functional calculus
    resolvent = vectors @ np.diag([float(transforms.cauchy(e)) for e in eigenvalues]) @ vectors.T
    return np.array([
        a - resolvent[0, 0],
        2.0 * b - 2.0 * resolvent[0, 1],
        c - resolvent[1, 1],
        gamma - c / det_a,
        2.0 * nu + 2.0 * b / det_a,
        rho - a / det_a,
    ])
