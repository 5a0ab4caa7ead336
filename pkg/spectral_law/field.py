"""External-field laws μ_H and their quadrature rules."""
import math
import os
import sys
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from scipy import stats
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from errors import ConfigError
from numerics import gh_standard_normal

DEFAULT_FIELD_ORDER = 40


class FieldLaw:
    """Law of the field entry 𝖧."""

    kind = "abstract"

    def quadrature(self) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def moment(self, p: int) -> float:
        nodes, weights = self.quadrature()
        return float(np.dot(weights, nodes ** p))

    @property
    def second_moment(self) -> float:
        return self.moment(2)

    @property
    def is_zero(self) -> bool:
        return False

    def quantile(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def expect(self, func) -> float:
        nodes, weights = self.quadrature()
        return float(np.dot(weights, func(nodes)))

    def to_dict(self) -> Dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PointMass(FieldLaw):
    h: float = 0.0

    kind = "point_mass"

    def quadrature(self):
        return np.array([self.h]), np.array([1.0])

    def moment(self, p: int) -> float:
        return float(self.h ** p)

    @property
    def is_zero(self) -> bool:
        return self.h == 0.0

    def quantile(self, u):
        return np.full(np.shape(np.atleast_1d(u)), self.h)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.full(n, self.h)

    def to_dict(self) -> Dict:
        return {"type": "point_mass", "h": self.h}


@dataclass(frozen=True)
class DiscreteAtoms(FieldLaw):
    values: Tuple[float, ...]
    weights: Tuple[float, ...]

    kind = "discrete_field"

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        if len(self.values) == 0 or len(self.values) != len(self.weights):
            raise ValueError("field atoms need matching non-empty values and weights")
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"field weights must be positive and sum to 1, got {self.weights}")
        order = np.argsort(self.values, kind="stable")
        object.__setattr__(self, "values", tuple(float(self.values[i]) for i in order))
        object.__setattr__(self, "weights", tuple(float(self.weights[i]) for i in order))

    def quadrature(self):
        return np.asarray(self.values), np.asarray(self.weights)

    @property
    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.values)

    def quantile(self, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        cumulative = np.cumsum(self.weights)
        index = np.searchsorted(cumulative, u - 1e-12, side="left")
        return np.asarray(self.values)[np.minimum(index, len(self.values) - 1)]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(np.asarray(self.values), size=n, p=np.asarray(self.weights))

    def to_dict(self) -> Dict:
        return {"type": "discrete_field", "values": list(self.values), "weights": list(self.weights)}


@dataclass(frozen=True)
class Gaussian(FieldLaw):
    mean: float = 0.0
    sd: float = 1.0
    quadrature_order: int = DEFAULT_FIELD_ORDER

    kind = "gaussian_field"

    def __post_init__(self):
        if self.sd < 0:
            raise ValueError(f"sd must be non-negative, got {self.sd}")

    def quadrature(self):
        rule = gh_standard_normal(self.quadrature_order)
        return self.mean + self.sd * rule.z, np.asarray(rule.w)

    def moment(self, p: int) -> float:
        # E[(m + sZ)^p] with E Z^{2k} = (2k−1)!!
        total = 0.0
        for k in range(0, p + 1, 2):
            total += math.comb(p, k) * self.mean ** (p - k) * self.sd ** k * _double_factorial(k - 1)
        return float(total)

    @property
    def is_zero(self) -> bool:
        return self.mean == 0.0 and self.sd == 0.0

    def quantile(self, u):
        return self.mean + self.sd * stats.norm.ppf(np.atleast_1d(u))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.mean + self.sd * rng.standard_normal(n)

    def to_dict(self) -> Dict:
        return {
            "type": "gaussian_field",
            "mean": self.mean,
            "sd": self.sd,
            "quadrature_order": self.quadrature_order,
        }


def _double_factorial(k: int) -> int:
    return 1 if k <= 0 else k * _double_factorial(k - 2)


def field_law_from_dict(spec: Dict, path: str = "field", default_order: int = DEFAULT_FIELD_ORDER) -> FieldLaw:
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("field law must be an object with a 'type'", field=path)
    kind = spec["type"]
    allowed = {
        "point_mass": {"type", "h"},
        "discrete_field": {"type", "values", "weights"},
        "gaussian_field": {"type", "mean", "sd", "quadrature_order"},
    }
    if kind not in allowed:
        raise ConfigError(f"unknown field law type '{kind}'", field=f"{path}.type")
    unknown = set(spec) - allowed[kind]
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", field=path)

    try:
        if kind == "point_mass":
            return PointMass(float(spec.get("h", 0.0)))
        if kind == "discrete_field":
            values = spec["values"]
            weights = spec.get("weights") or [1.0 / len(values)] * len(values)
            return DiscreteAtoms(tuple(values), tuple(weights))
        return Gaussian(
            float(spec.get("mean", 0.0)),
            float(spec.get("sd", 1.0)),
            int(spec.get("quadrature_order", default_order)),
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"invalid {kind}: {e}", field=path) from e
