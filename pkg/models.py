"""Data models shared across the orthoglass stages."""
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from errors import DomainError
from spectral_law import (
    DEFAULT_SPECTRAL_NODES,
    FieldLaw,
    SpectralLaw,
    TransformCache,
    is_standardized,
    rescaled,
    transform_cache,
)


@dataclass(frozen=True)
class ModelSpec:
    """β, a standardized spectral law μ_D and a field law μ_H."""
    beta: float
    spectral: SpectralLaw
    field: FieldLaw
    spectral_nodes: int = DEFAULT_SPECTRAL_NODES

    def __post_init__(self):
        if not self.beta > 0:
            raise DomainError(f"beta must be positive, got {self.beta}")
        if not is_standardized(self.spectral):
            raise DomainError(
                f"spectral law must be standardized (mean {self.spectral.mean:.3g}, "
                f"variance {self.spectral.variance:.3g}); call standardize() first"
            )
        g_plus = self.spectral.cauchy_at_support_max()
        if not self.beta < g_plus:
            raise DomainError(f"beta={self.beta} must be below G(d+)={g_plus}")

    @property
    def rescaled_law(self) -> SpectralLaw:
        return rescaled(self.spectral, self.beta)

    @property
    def transforms(self) -> TransformCache:
        """Transforms of μ_D̄ (Ḡ, R̄ and derivatives)."""
        return transform_cache(self.rescaled_law, self.spectral_nodes)

    @property
    def d_bar_plus(self) -> float:
        return self.beta * self.spectral.support_max

    def to_dict(self) -> Dict[str, Any]:
        return {"beta": self.beta, "spectral": self.spectral.to_dict(), "field": self.field.to_dict()}


@dataclass
class RSConstants:
    """Solved replica-symmetric constants of one model."""
    q_star: float
    sigma_star_sq: float
    lambda_star: float
    kappa_star: float
    delta_star: float
    a_star: float             # R̄(1−q*)
    r_prime_star: float       # R̄′(1−q*)
    u_star: float             # E[𝖧 tanh(𝖧+σ*𝖦)]
    delta_star_gaussian: float
    psi_rs: float = float("nan")
    psi_rs_sphere: float = float("nan")
    sphere_gamma: float = float("nan")
    iterations: int = 0
    residual: float = 0.0

    @property
    def one_minus_q(self) -> float:
        return 1.0 - self.q_star

    @property
    def sigma_star(self) -> float:
        return float(np.sqrt(self.sigma_star_sq))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "q_star": self.q_star,
            "sigma_star_sq": self.sigma_star_sq,
            "lambda_star": self.lambda_star,
            "kappa_star": self.kappa_star,
            "delta_star": self.delta_star,
            "a_star": self.a_star,
            "r_prime_star": self.r_prime_star,
            "u_star": self.u_star,
            "delta_star_gaussian": self.delta_star_gaussian,
            "psi_rs": self.psi_rs,
            "psi_rs_sphere": self.psi_rs_sphere,
            "sphere_gamma": self.sphere_gamma,
            "solver": {"iterations": self.iterations, "residual": self.residual},
        }


@dataclass
class SEState:
    """State-evolution Gram matrix Δ_t."""
    t: int
    delta: np.ndarray         # t×t, entries δ_{ss'}
    constants: RSConstants
    field: FieldLaw
    gh_order: int = 60

    def leading(self, t: int) -> np.ndarray:
        if t > self.t:
            raise ValueError(f"state only holds Δ_{self.t}, asked for Δ_{t}")
        return self.delta[:t, :t]

    @property
    def last_offdiagonal(self) -> float:
        return float(self.delta[self.t - 2, self.t - 1]) if self.t >= 2 else float("nan")

    def rows(self) -> List[List[float]]:
        return [list(map(float, row)) for row in self.delta]


@dataclass
class CouplingSample:
    """One finite-n realization J = OᵀDO with field h."""
    n: int
    d: np.ndarray             # eigenvalues of D, unscaled
    o: np.ndarray             # n×n orthogonal
    h: np.ndarray
    seed: int
    placement: str = "quantile"

    def coupling(self, beta: float) -> np.ndarray:
        """Dense J̄ = Oᵀ(βD)O."""
        return self.o.T @ ((beta * self.d)[:, None] * self.o)


@dataclass
class AMPTrace:
    """Iterates of the memory-free AMP run (columns are iterations)."""
    x: np.ndarray             # n×T, x¹..x^T
    y: np.ndarray             # n×(T+1), y⁰..y^T
    s: np.ndarray             # n×T, s¹..s^T
    gram_xx: np.ndarray
    gram_yy: np.ndarray
    gram_xy: np.ndarray
    seed: int
    degenerate: bool = False

    @property
    def T(self) -> int:
        return self.x.shape[1]

    @property
    def n(self) -> int:
        return self.x.shape[0]


@dataclass
class EnumerationResult:
    n: int
    log_z: float
    beta: float
    seed: int
    wall_time: float
    max_energy: float = float("nan")

    @property
    def log_z_per_n(self) -> float:
        return self.log_z / self.n


@dataclass
class Rank1Exponent:
    a: np.ndarray
    b: np.ndarray
    d: np.ndarray
    epsilon: float
    gamma_opt: float
    value: float
    derivative: float
    boundary_active: bool = False
    trace: List[Dict[str, float]] = field(default_factory=list)

    @property
    def alpha(self) -> float:
        return float(self.a @ self.a) / len(self.a)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": len(self.a),
            "alpha": self.alpha,
            "epsilon": self.epsilon,
            "gamma_opt": self.gamma_opt,
            "value": self.value,
            "derivative": self.derivative,
            "boundary_active": self.boundary_active,
            "trace": self.trace,
        }


@dataclass
class Rank2Exponent:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d_vec: np.ndarray
    d_eigs: np.ndarray
    epsilon: float
    gamma: float
    nu: float
    rho: float
    value: float
    gradient_norm: float
    boundary_active: bool = False
    trace: List[Dict[str, float]] = field(default_factory=list)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.gamma, self.nu], [self.nu, self.rho]])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": len(self.a),
            "epsilon": self.epsilon,
            "gamma": self.gamma,
            "nu": self.nu,
            "rho": self.rho,
            "value": self.value,
            "gradient_norm": self.gradient_norm,
            "boundary_active": self.boundary_active,
            "trace": self.trace,
        }


@dataclass
class Phi1Point:
    """Arguments (u, v, w; γ, U, V, W) of the first-moment function."""
    u: float
    v: np.ndarray
    w: np.ndarray
    gamma: float
    U: float
    V: np.ndarray
    W: np.ndarray
    delta: np.ndarray

    @property
    def t(self) -> int:
        return len(self.v)

    def flatten(self) -> np.ndarray:
        return np.concatenate([[self.u], self.v, self.w, [self.gamma, self.U], self.V, self.W])

    def with_flat(self, flat: np.ndarray) -> "Phi1Point":
        t = self.t
        return Phi1Point(
            u=float(flat[0]),
            v=flat[1:1 + t],
            w=flat[1 + t:1 + 2 * t],
            gamma=float(flat[1 + 2 * t]),
            U=float(flat[2 + 2 * t]),
            V=flat[3 + 2 * t:3 + 3 * t],
            W=flat[3 + 3 * t:3 + 4 * t],
            delta=self.delta,
        )


@dataclass
class Phi2Point:
    """Arguments (u,v,w,k,ℓ,m,p; γ,ν,ρ,U,V,W,K,L,M,P) of the second-moment function."""
    u: float
    v: np.ndarray
    w: np.ndarray
    k: float
    l: np.ndarray
    m: np.ndarray
    p: float
    gamma: float
    nu: float
    rho: float
    U: float
    V: np.ndarray
    W: np.ndarray
    K: float
    L: np.ndarray
    M: np.ndarray
    P: float
    delta: np.ndarray

    _SCALARS = ("u", "k", "p", "gamma", "nu", "rho", "U", "K", "P")
    ORDER = ("u", "v", "w", "k", "l", "m", "p", "gamma", "nu", "rho", "U", "V", "W", "K", "L", "M", "P")

    @property
    def t(self) -> int:
        return len(self.v)

    def flatten(self) -> np.ndarray:
        return np.concatenate([np.atleast_1d(getattr(self, name)) for name in self.ORDER]).astype(float)

    def with_flat(self, flat: np.ndarray) -> "Phi2Point":
        t = self.t
        values = {}
        offset = 0
        for name in self.ORDER:
            if name in self._SCALARS:
                values[name] = float(flat[offset])
                offset += 1
            else:
                values[name] = np.asarray(flat[offset:offset + t], dtype=float)
                offset += t
        return Phi2Point(delta=self.delta, **values)


@dataclass
class JointSample:
    """Draws of (𝖧, 𝖷₁..𝖷_{t+1}, 𝖸₀..𝖸_t) from the state-evolution law."""
    h: np.ndarray             # N
    x: np.ndarray             # N×(t+1), columns 𝖷₁..𝖷_{t+1}
    y: np.ndarray             # N×(t+1), columns 𝖸₀..𝖸_t
    delta: np.ndarray         # Δ_t
    seed: int

    @property
    def t(self) -> int:
        return self.delta.shape[0]

    @property
    def draws(self) -> int:
        return len(self.h)


@dataclass
class StationaryReport:
    t: int
    value: float
    target: float
    partials: Dict[str, float]
    norm_dV: float
    point: Optional[Any] = None

    @property
    def value_error(self) -> float:
        return abs(self.value - self.target)

    @property
    def max_partial(self) -> float:
        return max(abs(v) for v in self.partials.values()) if self.partials else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t": self.t,
            "value": self.value,
            "target": self.target,
            "value_error": self.value_error,
            "partials": self.partials,
            "max_partial": self.max_partial,
            "norm_dV": self.norm_dV,
        }


@dataclass
class GradcheckReport:
    analytic: np.ndarray
    numeric: np.ndarray
    steps: List[float]
    max_rel_error: float
    richardson_consistent: bool

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= 1e-5 and self.richardson_consistent

    def to_dict(self) -> Dict[str, Any]:
        return {
            "analytic": self.analytic.tolist(),
            "numeric": self.numeric.tolist(),
            "steps": self.steps,
            "max_rel_error": self.max_rel_error,
            "richardson_consistent": self.richardson_consistent,
            "passed": self.passed,
        }


@dataclass
class ExperimentConfig:
    """Validated experiment file contents."""
    command: str
    model: ModelSpec
    raw: Dict[str, Any]                      # canonical input, hashed into reports
    seed: Optional[int] = None
    n_list: List[int] = field(default_factory=list)
    t_max: int = 8
    replicates: int = 1
    placement: str = "quantile"
    tolerances: Dict[str, float] = field(default_factory=dict)
    output_path: Optional[str] = None
    output_format: str = "json"
    hciz: Dict[str, Any] = field(default_factory=dict)
    acceptance: Dict[str, Any] = field(default_factory=dict)
    shift: float = 0.0                       # affine map back to the unstandardized couplings
    scale: float = 1.0
