"""Cauchy and R-transforms, free cumulants and standardization."""
import logging
import math
import os
import sys
from functools import lru_cache
from typing import List, NamedTuple

import numpy as np
from scipy import integrate
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from errors import DomainError, ZeroVariance
from numerics import solve_monotone_decreasing
from .laws import (
    DEFAULT_SPECTRAL_NODES,
    DiscreteEigenvalues,
    Rademacher,
    ShiftedScaled,
    SpectralLaw,
)

logger = logging.getLogger(__name__)

MAX_CUMULANT_ORDER = 16


class TransformCache:
    """Transforms of a single law, with memoized inverse solves.

    Immutable from the caller's point of view; the only interior state is the
    lru cache of G⁻¹, which is thread-safe.
    """

    def __init__(self, law: SpectralLaw, spectral_nodes: int = DEFAULT_SPECTRAL_NODES):
        self.law = law
        self.spectral_nodes = spectral_nodes
        self.d_plus = float(law.support_max)
        self.g_at_dplus = float(law.cauchy_at_support_max())
        self._inverse = lru_cache(maxsize=8192)(self._solve_inverse)

    def __repr__(self) -> str:
        return f"TransformCache({self.law!r})"

    # --- Cauchy transform ---------------------------------------------------
    def cauchy(self, gamma):
        return self.law.cauchy(gamma)

    def cauchy_prime(self, gamma):
        return self.law.cauchy_prime(gamma)

    def cauchy_second(self, gamma):
        return self.law.cauchy_second(gamma)

    def log_potential(self, gamma):
        return self.law.log_potential(gamma)

    def in_range(self, alpha: float) -> bool:
        return 0.0 < alpha < self.g_at_dplus

    def _check_alpha(self, alpha: float) -> float:
        alpha = float(alpha)
        if not self.in_range(alpha):
            raise DomainError(f"argument {alpha} outside (0, G(d+)={self.g_at_dplus})")
        return alpha

    def _solve_inverse(self, alpha: float) -> float:
        upper = self.d_plus + 1.0 / alpha + self.law.sup_norm + 1.0
        return solve_monotone_decreasing(
            lambda g: float(self.law._cauchy(g)),
            alpha,
            lower=self.d_plus,
            upper_guess=upper,
            fprime=lambda g: float(self.law._cauchy_prime(g)),
            xtol=1e-8,
            newton_steps=5,
        )

    def cauchy_inverse(self, alpha: float) -> float:
        return self._inverse(self._check_alpha(alpha))

    # --- R-transform --------------------------------------------------------
    def r_transform(self, z: float) -> float:
        return self.cauchy_inverse(z) - 1.0 / z

    def r_prime(self, z: float) -> float:
        gamma = self.cauchy_inverse(z)
        return 1.0 / float(self.law._cauchy_prime(gamma)) + 1.0 / z ** 2

    def r_second(self, z: float) -> float:
        gamma = self.cauchy_inverse(z)
        g1 = float(self.law._cauchy_prime(gamma))
        g2 = float(self.law._cauchy_second(gamma))
        return -g2 / g1 ** 3 - 2.0 / z ** 3

    def integral_r(self, alpha: float) -> float:
        """∫₀^α R(z) dz by adaptive Gauss–Kronrod quadrature."""
        if alpha == 0.0:
            return 0.0
        self._check_alpha(alpha)
        value, error = integrate.quad(self.r_transform, 0.0, alpha, epsabs=1e-13, epsrel=1e-12, limit=200)
        if error > 1e-10:
            logger.warning("integral of R over [0, %.6g] has error estimate %.3g", alpha, error)
        return float(value)

    # --- expectations -------------------------------------------------------
    def quadrature(self):
        return self.law.quadrature(self.spectral_nodes)

    def expect(self, func) -> float:
        return self.law.expect(func, self.spectral_nodes)

    def free_cumulants(self, k_max: int) -> List[float]:
        return free_cumulants(self.law, k_max)


@lru_cache(maxsize=64)
def transform_cache(law: SpectralLaw, spectral_nodes: int = DEFAULT_SPECTRAL_NODES) -> TransformCache:
    return TransformCache(law, spectral_nodes)


def cauchy(law: SpectralLaw, gamma: float) -> float:
    return float(law.cauchy(gamma))


def cauchy_inverse(law: SpectralLaw, alpha: float) -> float:
    return transform_cache(law).cauchy_inverse(alpha)


def r_transform(law: SpectralLaw, z: float) -> float:
    return transform_cache(law).r_transform(z)


def r_prime(law: SpectralLaw, z: float) -> float:
    return transform_cache(law).r_prime(z)


def r_second(law: SpectralLaw, z: float) -> float:
    return transform_cache(law).r_second(z)


def free_cumulants(law: SpectralLaw, k_max: int) -> List[float]:
    """κ₁..κ_{k_max} from the free moment–cumulant recursion.

    m_n = Σ_{s=1}^{n} κ_s [z^{n−s}] M(z)^s with M(z) = Σ_i m_i z^i, solved for
    κ_n one order at a time.
    """
    if not 1 <= k_max <= MAX_CUMULANT_ORDER:
        raise ValueError(f"k_max must be in [1, {MAX_CUMULANT_ORDER}], got {k_max}")
    moments = np.array([law.moment(p) for p in range(k_max + 1)])

    # powers[s][j] = [z^j] M(z)^s, truncated at degree k_max
    powers = [np.zeros(k_max + 1) for _ in range(k_max + 1)]
    powers[0][0] = 1.0
    for s in range(1, k_max + 1):
        powers[s] = np.convolve(powers[s - 1], moments)[: k_max + 1]

    kappa = [0.0] * (k_max + 1)
    for n in range(1, k_max + 1):
        total = sum(kappa[s] * powers[s][n - s] for s in range(1, n))
        kappa[n] = float(moments[n] - total)
    return kappa[1:]


class Standardized(NamedTuple):
    """A standardized law and the affine map d = shift + scale·d_std."""

    law: SpectralLaw
    shift: float
    scale: float

    def effective_beta(self, beta: float) -> float:
        return beta * self.scale

    def free_energy_offset(self, beta: float) -> float:
        """½β·shift from the identity part of J, since ‖σ‖² = n."""
        return 0.5 * beta * self.shift


def standardize(law: SpectralLaw) -> Standardized:
    mean = law.mean
    variance = law.variance
    if variance < 1e-14:
        raise ZeroVariance(f"law {law.kind} has variance {variance:.3g}")
    if abs(mean) < 1e-15 and abs(variance - 1.0) < 1e-15:
        return Standardized(law, 0.0, 1.0)
    sd = math.sqrt(variance)

    if isinstance(law, DiscreteEigenvalues):
        values = tuple((v - mean) / sd for v in law.values)
        if len(values) == 2 and abs(law.weights[0] - 0.5) < 1e-12:
            return Standardized(Rademacher(), mean, sd)
        return Standardized(DiscreteEigenvalues(values, law.weights), mean, sd)

    if isinstance(law, ShiftedScaled):
        shift = (law.shift - mean) / sd
        scale = law.scale / sd
        base = law.base
        if abs(shift) < 1e-12 and abs(scale - 1.0) < 1e-12:
            return Standardized(base, mean, sd)
        return Standardized(ShiftedScaled(base, shift, scale), mean, sd)

    return Standardized(ShiftedScaled(law, -mean / sd, 1.0 / sd), mean, sd)


def is_standardized(law: SpectralLaw, tol: float = 1e-10) -> bool:
    return abs(law.mean) <= tol and abs(law.variance - 1.0) <= tol


__all__ = [
    "TransformCache",
    "transform_cache",
    "cauchy",
    "cauchy_inverse",
    "r_transform",
    "r_prime",
    "r_second",
    "free_cumulants",
    "Standardized",
    "standardize",
    "is_standardized",
]
