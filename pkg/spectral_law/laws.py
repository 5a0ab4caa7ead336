"""Limit spectral laws μ_D with compact support."""
import math
import os
import sys
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from scipy import optimize
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from errors import ConfigError, DomainError
from numerics import chebyshev_semicircle

DEFAULT_SPECTRAL_NODES = 400


class SpectralLaw:
    """Base class for spectral laws.

    Subclasses implement the unchecked transforms ``_cauchy``, ``_cauchy_prime``,
    ``_cauchy_second`` and ``_log_potential``; the public methods guard the
    domain γ > d₊.
    """

    kind = "abstract"

    @property
    def support_min(self) -> float:
        raise NotImplementedError

    @property
    def support_max(self) -> float:
        raise NotImplementedError

    @property
    def sup_norm(self) -> float:
        return max(abs(self.support_min), abs(self.support_max))

    def moment(self, p: int) -> float:
        raise NotImplementedError

    @property
    def mean(self) -> float:
        return self.moment(1)

    @property
    def variance(self) -> float:
        return self.moment(2) - self.moment(1) ** 2

    def quadrature(self, order: int = DEFAULT_SPECTRAL_NODES) -> Tuple[np.ndarray, np.ndarray]:
        """Nodes and weights with Σ w f(x) ≈ ∫ f dμ."""
        raise NotImplementedError

    def quantile(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def cauchy_at_support_max(self) -> float:
        """G(d₊) = lim_{z↓d₊} G(z); +∞ when an atom sits at d₊."""
        raise NotImplementedError

    def _check(self, gamma) -> np.ndarray:
        gamma = np.asarray(gamma, dtype=float)
        if not np.all(gamma > self.support_max):
            raise DomainError(
                f"argument {np.min(gamma)} must exceed support max {self.support_max} of {self.kind}"
            )
        return gamma

    def cauchy(self, gamma):
        return self._cauchy(self._check(gamma))

    def cauchy_prime(self, gamma):
        return self._cauchy_prime(self._check(gamma))

    def cauchy_second(self, gamma):
        return self._cauchy_second(self._check(gamma))

    def log_potential(self, gamma):
        """∫ log(γ − x) dμ(x)."""
        return self._log_potential(self._check(gamma))

    def expect(self, func, order: int = DEFAULT_SPECTRAL_NODES) -> float:
        nodes, weights = self.quadrature(order)
        return float(np.dot(weights, func(nodes)))

    def to_dict(self) -> Dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Semicircle(SpectralLaw):
    """Unit-variance semicircle on [−2, 2]."""

    kind = "semicircle"

    @property
    def support_min(self) -> float:
        return -2.0

    @property
    def support_max(self) -> float:
        return 2.0

    def moment(self, p: int) -> float:
        if p % 2:
            return 0.0
        k = p // 2
        return float(math.comb(2 * k, k) // (k + 1))

    def quadrature(self, order: int = DEFAULT_SPECTRAL_NODES):
        return chebyshev_semicircle(order)

    def cdf(self, x: float) -> float:
        x = min(max(x, -2.0), 2.0)
        return 0.5 + x * math.sqrt(4.0 - x * x) / (4.0 * math.pi) + math.asin(x / 2.0) / math.pi

    def quantile(self, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.empty_like(u)
        for i, ui in enumerate(u):
            if ui <= 0.0:
                out[i] = -2.0
            elif ui >= 1.0:
                out[i] = 2.0
            else:
                out[i] = optimize.brentq(lambda x: self.cdf(x) - ui, -2.0, 2.0, xtol=1e-14)
        return out

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return 4.0 * rng.beta(1.5, 1.5, size=n) - 2.0

    def cauchy_at_support_max(self) -> float:
        return 1.0

    @staticmethod
    def _root(gamma):
        return np.sqrt(gamma * gamma - 4.0)

    def _cauchy(self, gamma):
        return 2.0 / (gamma + self._root(gamma))

    def _cauchy_prime(self, gamma):
        return -self._cauchy(gamma) / self._root(gamma)

    def _cauchy_second(self, gamma):
        return 2.0 / self._root(gamma) ** 3

    def _log_potential(self, gamma):
        s = self._root(gamma)
        return 0.5 * gamma * self._cauchy(gamma) + np.log(0.5 * (gamma + s)) - 0.5

    def to_dict(self) -> Dict:
        return {"type": "semicircle"}


@dataclass(frozen=True)
class DiscreteEigenvalues(SpectralLaw):
    """Finitely many atoms; transforms are exact finite sums."""

    values: Tuple[float, ...]
    weights: Tuple[float, ...]

    kind = "discrete"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if values.ndim != 1 or values.size == 0 or values.shape != weights.shape:
            raise ValueError("discrete law needs matching non-empty values and weights")
        if np.any(weights <= 0):
            raise ValueError(f"weights must be positive, got {self.weights}")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {weights.sum()!r}")
        order = np.argsort(values, kind="stable")
        object.__setattr__(self, "values", tuple(float(v) for v in values[order]))
        object.__setattr__(self, "weights", tuple(float(w) for w in weights[order]))

    @property
    def _x(self) -> np.ndarray:
        return np.asarray(self.values)

    @property
    def _w(self) -> np.ndarray:
        return np.asarray(self.weights)

    @property
    def support_min(self) -> float:
        return self.values[0]

    @property
    def support_max(self) -> float:
        return self.values[-1]

    def moment(self, p: int) -> float:
        return float(np.dot(self._w, self._x ** p))

    def quadrature(self, order: int = DEFAULT_SPECTRAL_NODES):
        return self._x, self._w

    def quantile(self, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        cumulative = np.cumsum(self._w)
        index = np.searchsorted(cumulative, u - 1e-12, side="left")
        return self._x[np.minimum(index, len(self.values) - 1)]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(self._x, size=n, p=self._w)

    def cauchy_at_support_max(self) -> float:
        return math.inf

    def _outer(self, gamma):
        return np.subtract.outer(gamma, self._x)

    def _cauchy(self, gamma):
        return np.dot(1.0 / self._outer(gamma), self._w)

    def _cauchy_prime(self, gamma):
        return -np.dot(self._outer(gamma) ** -2, self._w)

    def _cauchy_second(self, gamma):
        return 2.0 * np.dot(self._outer(gamma) ** -3, self._w)

    def _log_potential(self, gamma):
        return np.dot(np.log(self._outer(gamma)), self._w)

    def to_dict(self) -> Dict:
        return {"type": "discrete", "values": list(self.values), "weights": list(self.weights)}


@dataclass(frozen=True)
class Rademacher(DiscreteEigenvalues):
    """Atoms ±1 with equal weight (random orthogonal model)."""

    values: Tuple[float, ...] = (-1.0, 1.0)
    weights: Tuple[float, ...] = (0.5, 0.5)

    kind = "rademacher"

    def to_dict(self) -> Dict:
        return {"type": "rademacher"}


@dataclass(frozen=True)
class ShiftedScaled(SpectralLaw):
    """Law of ``shift + scale·X`` for X ~ base."""

    base: SpectralLaw
    shift: float = 0.0
    scale: float = 1.0

    kind = "shifted_scaled"

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    def _inner(self, gamma):
        return (gamma - self.shift) / self.scale

    @property
    def support_min(self) -> float:
        return self.shift + self.scale * self.base.support_min

    @property
    def support_max(self) -> float:
        return self.shift + self.scale * self.base.support_max

    def moment(self, p: int) -> float:
        return float(sum(
            math.comb(p, k) * self.shift ** (p - k) * self.scale ** k * self.base.moment(k)
            for k in range(p + 1)
        ))

    def quadrature(self, order: int = DEFAULT_SPECTRAL_NODES):
        nodes, weights = self.base.quadrature(order)
        return self.shift + self.scale * nodes, weights

    def quantile(self, u):
        return self.shift + self.scale * self.base.quantile(u)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.shift + self.scale * self.base.sample(n, rng)

    def cauchy_at_support_max(self) -> float:
        return self.base.cauchy_at_support_max() / self.scale

    def _cauchy(self, gamma):
        return self.base._cauchy(self._inner(gamma)) / self.scale

    def _cauchy_prime(self, gamma):
        return self.base._cauchy_prime(self._inner(gamma)) / self.scale ** 2

    def _cauchy_second(self, gamma):
        return self.base._cauchy_second(self._inner(gamma)) / self.scale ** 3

    def _log_potential(self, gamma):
        return math.log(self.scale) + self.base._log_potential(self._inner(gamma))

    def to_dict(self) -> Dict:
        return {
            "type": "shifted_scaled",
            "base": self.base.to_dict(),
            "shift": self.shift,
            "scale": self.scale,
        }


def rescaled(law: SpectralLaw, beta: float) -> SpectralLaw:
    """μ_D̄: the law of β·d."""
    if beta == 1.0:
        return law
    return ShiftedScaled(law, 0.0, float(beta))


def spectral_law_from_dict(spec: Dict, path: str = "spectral") -> SpectralLaw:
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("spectral law must be an object with a 'type'", field=path)
    kind = spec["type"]
    allowed = {
        "semicircle": {"type"},
        "rademacher": {"type"},
        "discrete": {"type", "values", "weights"},
        "shifted_scaled": {"type", "base", "shift", "scale"},
    }
    if kind not in allowed:
        raise ConfigError(f"unknown spectral law type '{kind}'", field=f"{path}.type")
    unknown = set(spec) - allowed[kind]
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", field=path)

    try:
        if kind == "semicircle":
            return Semicircle()
        if kind == "rademacher":
            return Rademacher()
        if kind == "discrete":
            values = spec["values"]
            weights = spec.get("weights") or [1.0 / len(values)] * len(values)
            return DiscreteEigenvalues(tuple(values), tuple(weights))
        return ShiftedScaled(
            spectral_law_from_dict(spec["base"], f"{path}.base"),
            float(spec.get("shift", 0.0)),
            float(spec.get("scale", 1.0)),
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"invalid {kind} law: {e}", field=path) from e
