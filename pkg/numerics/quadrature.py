"""Fixed quadrature rules.

All Gaussian expectations in the library are E over 𝖧 ⊥ 𝖦, so the only rules
needed are Gauss–Hermite for 𝖦, Gauss–Legendre for ∫₀^α, and a Chebyshev
rule of the second kind for the semicircle density.
"""
from dataclasses import dataclass
import os
import sys
from functools import lru_cache

import numpy as np
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from errors import QuadratureOverflow

MAX_QUADRATURE_ORDER = 200


@dataclass(frozen=True)
class GHQuadrature:
    """Nodes/weights for E[f(Z)] with Z ~ N(0,1)."""

    z: np.ndarray
    w: np.ndarray

    def expect(self, values: np.ndarray, axis: int = -1) -> np.ndarray:
        return np.tensordot(values, self.w, axes=([axis], [0]))


def _check_order(order: int) -> None:
    if order < 1:
        raise ValueError(f"quadrature order must be positive, got {order}")
    if order > MAX_QUADRATURE_ORDER:
        raise QuadratureOverflow(
            f"quadrature order {order} exceeds maximum {MAX_QUADRATURE_ORDER}"
        )


@lru_cache(maxsize=32)
def _hermgauss(order: int):
    x, w = np.polynomial.hermite.hermgauss(order)
    z = np.sqrt(2.0) * x
    w = w / np.sqrt(np.pi)
    z.setflags(write=False)
    w.setflags(write=False)
    return z, w


def gh_standard_normal(order: int) -> GHQuadrature:
    """Physicists' Hermite rule rescaled to the standard normal."""
    _check_order(order)
    z, w = _hermgauss(order)
    return GHQuadrature(z=z, w=w)


@lru_cache(maxsize=32)
def _leggauss(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(order: int, lo: float, hi: float):
    """Gauss–Legendre nodes and weights on [lo, hi]."""
    x, w = _leggauss(order)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


@lru_cache(maxsize=16)
def chebyshev_semicircle(order: int):
    """Rule for ∫ f dμ with μ the unit-variance semicircle on [−2, 2].

    Gauss–Chebyshev of the second kind: x_k = 2cos θ_k, θ_k = kπ/(N+1),
    w_k = 2 sin²θ_k / (N+1). Exact for polynomials of degree ≤ 2N−1.
    """
    k = np.arange(1, order + 1)
    theta = k * np.pi / (order + 1)
    nodes = 2.0 * np.cos(theta)
    weights = 2.0 * np.sin(theta) ** 2 / (order + 1)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def expect_field_gaussian(field_nodes, field_weights, sigma: float, func, rule: GHQuadrature) -> float:
    """E[func(𝖧 + σ𝖦)] with 𝖧 on a discrete rule and 𝖦 standard normal."""
    grid = np.asarray(field_nodes)[:, None] + sigma * rule.z[None, :]
    return float(np.asarray(field_weights) @ func(grid) @ rule.w)


def expect_field_gaussian_pair(field_nodes, field_weights, func, rule: GHQuadrature) -> float:
    """E[func(𝖧, 𝖦)] where func receives the field and Gaussian grids separately."""
    h = np.broadcast_to(np.asarray(field_nodes)[:, None], (len(field_nodes), len(rule.z)))
    g = np.broadcast_to(rule.z[None, :], h.shape)
    return float(np.asarray(field_weights) @ func(h, g) @ rule.w)
