"""Finite-n HCIZ exponents (rank one and two) and a Haar Monte Carlo check."""
import logging
import math
import os
import sys
from typing import Dict, List, Optional

import numpy as np
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from errors import BarrierStall, DomainError, InfeasibleAlpha, SingularGram
from models import Rank1Exponent, Rank2Exponent
from numerics import StreamingLogSumExp, derive_seeds, generator, solve_monotone_decreasing
from .functionals import BASIS, sym2

logger = logging.getLogger(__name__)

MAX_NEWTON_ITERATIONS = 200
MAX_HALVINGS = 60
ARMIJO = 1e-4


def default_epsilon(d_plus: float) -> float:
    return 1e-6 * (1.0 + abs(d_plus))


def _finite_vector(name: str, values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise DomainError(f"{name} has non-finite entries")
    return values


def hciz_rank1(a, b, d, epsilon: Optional[float] = None) -> Rank1Exponent:
    """E_n(a, b) = inf_{γ ≥ d₊+ε} γα + bᵀ(γ−D)⁻¹b/n − n⁻¹log det(γ−D) − (1 + log α).

    The minimizer solves F_n(γ) = α with F_n(γ) = G_n(γ) + bᵀ(γ−D)⁻²b/n. When
    F_n(d₊+ε) ≤ α the objective is nondecreasing on the domain and the
    minimum sits on the boundary.

    An α above that range is not an error: the boundary minimizer is returned
    with ``boundary_active`` set. ``InfeasibleAlpha`` is raised only when α is
    not positive or not finite.
    """
    a = _finite_vector("a", a)
    b = _finite_vector("b", b)
    d = _finite_vector("d", d)
    n = len(d)
    if not (len(a) == len(b) == n):
        raise DomainError(f"length mismatch: a={len(a)} b={len(b)} d={n}")
    alpha = float(a @ a) / n
    if not (alpha > 0 and math.isfinite(alpha)):
        raise InfeasibleAlpha(f"alpha=|a|^2/n must be positive and finite, got {alpha}")

    d_plus = float(d.max())
    epsilon = default_epsilon(d_plus) if epsilon is None else epsilon
    lo = d_plus + epsilon
    b_sq = b * b / n
    trace: List[Dict[str, float]] = []

    def f_n(gamma: float) -> float:
        gap = gamma - d
        value = float(np.mean(1.0 / gap) + np.sum(b_sq / gap ** 2))
        trace.append({"gamma": gamma, "residual": value - alpha})
        return value

    def f_n_prime(gamma: float) -> float:
        gap = gamma - d
        return float(-np.mean(1.0 / gap ** 2) - 2.0 * np.sum(b_sq / gap ** 3))

    def objective(gamma: float) -> float:
        gap = gamma - d
        return float(gamma * alpha + np.sum(b_sq / gap) - np.mean(np.log(gap)) - (1.0 + math.log(alpha)))

    boundary = f_n(lo) <= alpha
    if boundary:
        gamma = lo
        logger.info("rank-1 minimizer on the boundary gamma = d+ + eps = %.6g", lo)
    else:
        gamma = solve_monotone_decreasing(
            f_n, alpha, lower=lo, upper_guess=lo + 1.0 / alpha + 1.0, fprime=f_n_prime, xtol=1e-12, newton_steps=8
        )
    derivative = alpha - f_n(gamma)
    return Rank1Exponent(
        a=a,
        b=b,
        d=d,
        epsilon=epsilon,
        gamma_opt=float(gamma),
        value=objective(gamma),
        derivative=float(derivative),
        boundary_active=boundary,
        trace=trace,
    )


class Rank2Objective:
    """Tr ΛM + Σ_i w_i [s_iᵀ(Λ−x_i)⁻¹s_i − log det(Λ−x_i)] − 2 − log det M over Λ = [[γ,ν],[ν,ρ]]."""

    def __init__(self, gram: np.ndarray, nodes: np.ndarray, weights: np.ndarray,
                 loads: Optional[np.ndarray] = None):
        self.gram = np.asarray(gram, dtype=float)
        self.nodes = np.asarray(nodes, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self.loads = np.zeros((len(self.nodes), 2)) if loads is None else np.asarray(loads, dtype=float)
        self.log_det_gram = math.log(float(np.linalg.det(self.gram)))

    def _pieces(self, theta: np.ndarray):
        lam = sym2(*theta)
        shifted = lam[None, :, :] - self.nodes[:, None, None] * np.eye(2)[None, :, :]
        det = shifted[:, 0, 0] * shifted[:, 1, 1] - shifted[:, 0, 1] ** 2
        inverse = np.stack([
            np.stack([shifted[:, 1, 1], -shifted[:, 0, 1]], axis=-1),
            np.stack([-shifted[:, 1, 0], shifted[:, 0, 0]], axis=-1),
        ], axis=1) / det[:, None, None]
        projected = np.einsum("nij,nj->ni", inverse, self.loads)
        return lam, det, inverse, projected

    def value(self, theta: np.ndarray) -> float:
        lam, det, _, projected = self._pieces(theta)
        quadratic = np.einsum("ni,ni->n", self.loads, projected)
        return float(
            np.trace(lam @ self.gram)
            + self.weights @ (quadratic - np.log(det))
            - 2.0
            - self.log_det_gram
        )

    def moment_map(self, theta: np.ndarray) -> np.ndarray:
        """Σ w_i [(Λ−x_i)⁻¹ + (Λ−x_i)⁻¹s_is_iᵀ(Λ−x_i)⁻¹]; the gradient vanishes when it equals M."""
        _, _, inverse, projected = self._pieces(theta)
        return np.einsum("n,nij->ij", self.weights, inverse) + np.einsum(
            "n,ni,nj->ij", self.weights, projected, projected
        )

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        residual = self.gram - self.moment_map(theta)
        return np.einsum("aij,ij->a", BASIS, residual)

    def hessian(self, theta: np.ndarray) -> np.ndarray:
        _, _, inverse, projected = self._pieces(theta)
        outer = np.einsum("ni,nj->nij", projected, projected)
        first = np.einsum("n,aij,njk,bkl,nli->ab", self.weights, BASIS, inverse, BASIS, inverse)
        second = np.einsum("n,aij,njk,bkl,nli->ab", self.weights, BASIS, inverse, BASIS, outer)
        return first + second + second.T

    def lowest_eigenvalue(self, theta: np.ndarray) -> float:
        return float(np.linalg.eigvalsh(sym2(*theta))[0])


def minimize_rank2(objective: Rank2Objective, floor: float, start: np.ndarray,
                   tol: float = 1e-10) -> Dict:
    """Damped Newton on (γ, ν, ρ) over {Λ ⪰ floor·I}, with a feasibility and Armijo line search."""
    theta = np.asarray(start, dtype=float)
    if objective.lowest_eigenvalue(theta) <= floor:
        raise DomainError(f"start {theta.tolist()} is not strictly inside Lambda > {floor}")
    value = objective.value(theta)
    trace: List[Dict[str, float]] = []
    for iteration in range(MAX_NEWTON_ITERATIONS):
        grad = objective.gradient(theta)
        norm = float(np.linalg.norm(grad))
        trace.append({"iteration": iteration, "value": value, "gradient_norm": norm})
        if norm <= tol:
            return {"theta": theta, "value": value, "gradient_norm": norm, "boundary": False, "trace": trace}
        hess = objective.hessian(theta)
        try:
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = -grad
        if grad @ step >= 0:
            step = -grad

        size = 1.0
        for _ in range(MAX_HALVINGS):
            candidate = theta + size * step
            if objective.lowest_eigenvalue(candidate) > floor:
                candidate_value = objective.value(candidate)
                if candidate_value <= value + ARMIJO * size * float(grad @ step):
                    break
            size *= 0.5
        else:
            slack = objective.lowest_eigenvalue(theta) - floor
            if slack <= 1e-8 * max(1.0, abs(floor)):
                logger.info("rank-2 minimizer pressed against Lambda = %.6g I", floor)
                return {"theta": theta, "value": value, "gradient_norm": norm, "boundary": True, "trace": trace}
            if norm <= 1e-6:
                logger.debug("rank-2 line search stalled at gradient norm %.3g", norm)
                return {"theta": theta, "value": value, "gradient_norm": norm, "boundary": False, "trace": trace}
            raise BarrierStall("rank-2 line search failed to decrease the objective",
                               residual=norm, last_iterate=theta.tolist())
        theta, value = candidate, candidate_value
    raise BarrierStall(f"rank-2 Newton did not converge in {MAX_NEWTON_ITERATIONS} iterations",
                       residual=float(np.linalg.norm(objective.gradient(theta))), last_iterate=theta.tolist())


def feasible_start(gram: np.ndarray, floor: float) -> np.ndarray:
    start = np.linalg.inv(gram)
    lowest = float(np.linalg.eigvalsh(start)[0])
    if lowest <= floor + 0.5:
        start = start + (floor + 1.0 - lowest) * np.eye(2)
    return np.array([start[0, 0], start[0, 1], start[1, 1]])


def hciz_rank2(a, b, c, d_vec, d_eigs, epsilon: Optional[float] = None) -> Rank2Exponent:
    """E_n(a, b, c, d) minimized over Λ ⪰ (d₊+ε)I; ``d_vec`` is the second load, ``d_eigs`` the spectrum."""
    a = _finite_vector("a", a)
    b = _finite_vector("b", b)
    c = _finite_vector("c", c)
    d_vec = _finite_vector("d_vec", d_vec)
    d_eigs = _finite_vector("d_eigs", d_eigs)
    n = len(d_eigs)
    if not all(len(v) == n for v in (a, b, c, d_vec)):
        raise DomainError("a, b, c, d_vec and d_eigs must share one length")

    gram = np.array([[a @ a, a @ c], [a @ c, c @ c]]) / n
    eigenvalues = np.linalg.eigvalsh(gram)
    if not eigenvalues[0] > 1e-12 * max(1.0, eigenvalues[1]):
        raise SingularGram(f"Gram matrix of (a, c)/n is singular: eigenvalues {eigenvalues.tolist()}")

    d_plus = float(d_eigs.max())
    epsilon = default_epsilon(d_plus) if epsilon is None else epsilon
    floor = d_plus + epsilon
    objective = Rank2Objective(gram, d_eigs, np.full(n, 1.0 / n), np.column_stack([b, d_vec]))
    result = minimize_rank2(objective, floor, feasible_start(gram, floor))
    gamma, nu, rho = result["theta"]
    return Rank2Exponent(
        a=a,
        b=b,
        c=c,
        d_vec=d_vec,
        d_eigs=d_eigs,
        epsilon=epsilon,
        gamma=float(gamma),
        nu=float(nu),
        rho=float(rho),
        value=result["value"],
        gradient_norm=result["gradient_norm"],
        boundary_active=result["boundary"],
        trace=result["trace"],
    )


def hciz_mc(a, b, d, draws: int, seed: int, chunk: int = 20_000) -> Dict[str, float]:
    """(2/n) log Ê_O[exp(bᵀOa + aᵀOᵀDOa/2)] with D = diag(d).

    Oa is uniform on the sphere of radius ‖a‖, so each draw is a normalized
    Gaussian vector. Chunks use derived seeds and are reduced in order.
    """
    a = _finite_vector("a", a)
    b = _finite_vector("b", b)
    d = _finite_vector("d", d)
    n = len(d)
    if draws < 1:
        raise ValueError(f"draws must be >= 1, got {draws}")
    radius = math.sqrt(float(a @ a))
    shards = math.ceil(draws / chunk)
    first = StreamingLogSumExp()
    second = StreamingLogSumExp()
    remaining = draws
    for shard_seed in derive_seeds(seed, shards):
        size = min(chunk, remaining)
        remaining -= size
        g = generator(shard_seed).standard_normal((size, n))
        x = radius * g / np.linalg.norm(g, axis=1, keepdims=True)
        exponent = x @ b + 0.5 * (x * x) @ d
        first.update(exponent)
        second.update(2.0 * exponent)

    log_mean = first.value - math.log(draws)
    # relative variance of the importance weights, for the standard error of log-mean
    spread = math.exp(second.value - math.log(draws) - 2.0 * log_mean) - 1.0
    return {
        "value": 2.0 * log_mean / n,
        "draws": draws,
        "stderr": 2.0 * math.sqrt(max(spread, 0.0) / draws) / n,
        "effective_draws": float(draws / (1.0 + max(spread, 0.0))),
    }
