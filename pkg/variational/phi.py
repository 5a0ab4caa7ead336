"""First- and second-moment variational functions and their stationary points.

At the stationary points every expectation collapses onto the pair
(𝖧, 𝖸_t) with 𝖸_t ~ N(0, κ*δ_tt), so values and partials are computed by
deterministic quadrature. Off the stationary manifold the t-dimensional
Gaussian expectation is estimated on a fixed draw from the joint
state-evolution law, so the objective stays a smooth function of its
arguments.
"""
import logging
import math
import os
import sys
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, special
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from errors import DomainError, NoConvergence, SingularGram
from models import JointSample, ModelSpec, Phi1Point, Phi2Point, RSConstants, SEState, StationaryReport
from numerics import expect_field_gaussian_pair, gh_standard_normal, minimize_convex_1d, spawn_streams
from rs_core import log_2cosh
from spectral_law import FieldLaw
from state_evolution import amp_denoiser, se_advance
from .functionals import f2_func, f2_func_grad, f_func, f_func_prime, h2_func, h2_func_grad, h_func, h_func_grad
from .hciz import default_epsilon

logger = logging.getLogger(__name__)

DEFAULT_GH_ORDER = 60


# --- linear algebra helpers -------------------------------------------------

def symmetric_sqrt(matrix: np.ndarray) -> np.ndarray:
    eigenvalues, vectors = np.linalg.eigh(matrix)
    return (vectors * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ vectors.T


def symmetric_inv_sqrt(matrix: np.ndarray, rcond: float = 1e-12) -> np.ndarray:
    eigenvalues, vectors = np.linalg.eigh(matrix)
    if eigenvalues[0] <= rcond * max(eigenvalues[-1], 0.0):
        raise SingularGram(f"Delta_t is numerically singular (eigenvalues {eigenvalues[0]:.3g}..{eigenvalues[-1]:.3g})")
    return (vectors / np.sqrt(eigenvalues)) @ vectors.T


def schur_complement(matrix: np.ndarray) -> float:
    """Last pivot of the Cholesky factor; 0 when the matrix is numerically singular."""
    try:
        factor = linalg.cholesky(matrix, lower=True)
    except np.linalg.LinAlgError:
        return 0.0
    return float(factor[-1, -1] ** 2)


def extend_state(se_state: SEState, t: int) -> SEState:
    state = se_state
    while state.t < t:
        state = se_advance(state)
    return state


def _ell(x, y, z):
    """𝓛(x,y,z) = log Σ± e^{±x±y±z} over the four even sign patterns, with its partials."""
    exponents = np.stack([x + y + z, x - y - z, -x + y - z, -x - y + z])
    value = special.logsumexp(exponents, axis=0)
    p = np.exp(exponents - value)
    return value, p[0] + p[1] - p[2] - p[3], p[0] - p[1] + p[2] - p[3], p[0] - p[1] - p[2] + p[3]


def _constants_terms(constants: RSConstants) -> Tuple[float, float, float, float]:
    a = constants.a_star
    kappa = constants.kappa_star
    return a, kappa, 1.0 / math.sqrt(kappa), constants.lambda_star - a / kappa


# --- joint law ----------------------------------------------------------------

def sample_joint_law(constants: RSConstants, field: FieldLaw, se_state: SEState, t: int,
                     draws: int, seed: int) -> JointSample:
    """𝖧 ~ μ_H ⊥ (𝖸₀..𝖸_t) ~ N(0, κ*·diag(δ*, Δ_t)), and 𝖷_s = f(𝖧, 𝖸_{s−1})."""
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    if constants.kappa_star <= 0 or constants.sigma_star_sq == 0.0:
        raise DomainError("joint law is degenerate when sigma*^2 = 0")
    state = extend_state(se_state, t)
    delta = state.leading(t)
    streams = spawn_streams(seed)

    covariance = np.zeros((t + 1, t + 1))
    covariance[0, 0] = constants.delta_star
    covariance[1:, 1:] = delta
    root = symmetric_sqrt(constants.kappa_star * covariance)
    y = streams["init"].standard_normal((draws, t + 1)) @ root
    h = np.asarray(field.sample(draws, streams["field"]), dtype=float)
    x = amp_denoiser(constants)(h[:, None], y)
    return JointSample(h=h, x=x, y=y, delta=delta, seed=seed)


def joint_features(sample: JointSample, constants: RSConstants) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(𝖧, Δ_t^{−1/2}𝖷, κ*^{−1/2}Δ_t^{−1/2}𝖸) on the draw."""
    t = sample.t
    inv_sqrt = symmetric_inv_sqrt(sample.delta)
    xi = sample.x[:, :t] @ inv_sqrt
    eta = sample.y[:, 1:] @ inv_sqrt / math.sqrt(constants.kappa_star)
    return sample.h, xi, eta


# --- Φ₁ -------------------------------------------------------------------------

def phi1_objective(point: Phi1Point, model: ModelSpec, constants: RSConstants,
                   sample: JointSample) -> Tuple[float, np.ndarray]:
    """Φ₁ and its gradient (ordered as Phi1Point.flatten) on a fixed draw."""
    h, xi, eta = joint_features(sample, constants)
    a, kappa, rk, quad_w = _constants_terms(constants)
    law = model.transforms
    u, v, w, gamma, U, V, W = point.u, point.v, point.w, point.gamma, point.U, point.V, point.W

    alpha = 1.0 - v @ v - w @ w
    if not alpha > 0:
        raise DomainError(f"need |v|^2 + |w|^2 < 1, got {1.0 - alpha}")
    local = U * h + xi @ V + eta @ W
    tau = np.tanh(local)
    beta = v - rk * w
    f_value = f_func(gamma, model, constants)
    d_gamma_h, d_alpha_h = h_func_grad(gamma, alpha, law)

    value = (
        float(np.mean(log_2cosh(local)))
        - u * U - v @ V - w @ W
        + u + a * rk * (v @ w) + 0.5 * quad_w * (w @ w)
        + 0.5 * f_value * (beta @ beta)
        + 0.5 * h_func(gamma, alpha, law)
    )
    n = len(h)
    grad = np.concatenate([
        [1.0 - U],
        -V + a * rk * w + f_value * beta - d_alpha_h * v,
        -W + a * rk * v + quad_w * w - rk * f_value * beta - d_alpha_h * w,
        [0.5 * f_func_prime(gamma, model, constants) * (beta @ beta) + 0.5 * d_gamma_h],
        [float(np.mean(tau * h)) - u],
        xi.T @ tau / n - v,
        eta.T @ tau / n - w,
    ])
    return float(value), grad


def _stationary_pieces(model: ModelSpec, constants: RSConstants, se_state: SEState, t: int,
                       gh_order: int) -> Dict:
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    state = extend_state(se_state, t + 1)
    delta_t = state.leading(t)
    delta_next = state.leading(t + 1)
    column = symmetric_sqrt(delta_t)[:, t - 1]
    delta_tt = float(delta_next[t - 1, t - 1])

    gap = delta_tt + float(delta_next[t, t]) - 2.0 * float(delta_next[t - 1, t]) - schur_complement(delta_next)
    norm_dV = constants.one_minus_q * math.sqrt(max(gap, 0.0))

    sigma_t = math.sqrt(constants.kappa_star * delta_tt)
    rule = gh_standard_normal(gh_order)
    nodes, weights = model.field.quadrature()

    def expect(func):
        return expect_field_gaussian_pair(nodes, weights, lambda hh, g: func(hh, hh + sigma_t * g), rule)

    return {
        "state": state,
        "delta_t": delta_t,
        "column": column,
        "delta_tt": delta_tt,
        "norm_dV": norm_dV,
        "expect": expect,
    }


def phi1_star_point(constants: RSConstants, delta_t: np.ndarray, column: np.ndarray) -> Phi1Point:
    z = constants.one_minus_q
    root_kappa = math.sqrt(constants.kappa_star)
    return Phi1Point(
        u=constants.u_star,
        v=z * column,
        w=root_kappa * z * column,
        gamma=constants.lambda_star,
        U=1.0,
        V=np.zeros_like(column),
        W=root_kappa * column,
        delta=delta_t,
    )


def phi1_stationary(model: ModelSpec, constants: RSConstants, se_state: SEState, t: int,
                    gh_order: int = DEFAULT_GH_ORDER) -> StationaryReport:
    """Φ₁ at its approximate stationary point, with the analytic partials there.

    ‖∂_VΦ₁‖² = (1−q*)²(δ_tt + δ_{t+1,t+1} − 2δ_{t,t+1} − Schur(Δ_{t+1})), which
    avoids Δ_t^{−1/2} when Δ_t becomes ill-conditioned.
    """
    pieces = _stationary_pieces(model, constants, se_state, t, gh_order)
    expect = pieces["expect"]
    point = phi1_star_point(constants, pieces["delta_t"], pieces["column"])
    a, kappa, rk, quad_w = _constants_terms(constants)
    law = model.transforms
    u, v, w, gamma, U, V, W = point.u, point.v, point.w, point.gamma, point.U, point.V, point.W

    alpha = 1.0 - v @ v - w @ w
    beta = v - rk * w
    f_value = f_func(gamma, model, constants)
    d_gamma_h, d_alpha_h = h_func_grad(gamma, alpha, law)

    entropy = expect(lambda hh, y: log_2cosh(y))
    value = (
        entropy
        - u * U - v @ V - w @ W
        + u + a * rk * (v @ w) + 0.5 * quad_w * (w @ w)
        + 0.5 * f_value * (beta @ beta)
        + 0.5 * h_func(gamma, alpha, law)
    )
    sech_sq = 1.0 - expect(lambda hh, y: np.tanh(y) ** 2)
    partials = {
        "u": abs(1.0 - U),
        "v": float(np.linalg.norm(-V + a * rk * w + f_value * beta - d_alpha_h * v)),
        "w": float(np.linalg.norm(-W + a * rk * v + quad_w * w - rk * f_value * beta - d_alpha_h * w)),
        "gamma": abs(0.5 * f_func_prime(gamma, model, constants) * (beta @ beta) + 0.5 * d_gamma_h),
        "U": abs(expect(lambda hh, y: hh * np.tanh(y)) - u),
        # E[𝖸 tanh(𝖧+𝖸_t)] = κ*Δ_t e_t E sech², so ∂_W = κ*^{1/2}Δ_t^{1/2}e_t (E sech² − (1−q*))
        "W": math.sqrt(kappa) * abs(sech_sq - constants.one_minus_q) * math.sqrt(pieces["delta_tt"]),
    }
    logger.debug("phi1 t=%d value=%.12g |dV|=%.3g", t, value, pieces["norm_dV"])
    return StationaryReport(
        t=t,
        value=float(value),
        target=constants.psi_rs,
        partials=partials,
        norm_dV=pieces["norm_dV"],
        point=point,
    )


def dv_decay(reports: Sequence[StationaryReport], constants: RSConstants,
             relative_floor: float = 1e-7) -> Dict:
    """Monotonicity and geometric rate of ‖∂_VΦ₁‖ in t.

    Values below relative_floor·(1−q*)√δ* are at the rounding level of the
    Gram-matrix cancellation; decrease is only required above it.
    """
    floor = relative_floor * constants.one_minus_q * math.sqrt(constants.delta_star)
    norms = np.array([r.norm_dV for r in reports])
    ts = np.array([r.t for r in reports], dtype=float)
    above = norms > floor
    monotone = True
    for previous, current, previous_above in zip(norms[:-1], norms[1:], above[:-1]):
        if previous_above and not current < previous:
            monotone = False
        if not previous_above and current > floor:
            monotone = False
    if above.sum() >= 2:
        slope = np.polyfit(ts[above], np.log(norms[above]), 1)[0]
        ratio = float(math.exp(slope))
    else:
        ratio = 0.0
    return {"norms": norms.tolist(), "floor": floor, "monotone": monotone, "decay_ratio": ratio}


# --- Φ₂ -------------------------------------------------------------------------

def _phi2_deterministic(point: Phi2Point, model: ModelSpec, constants: RSConstants):
    """Value and partials of everything in Φ₂ except the 𝓛 expectation."""
    a, kappa, rk, quad_w = _constants_terms(constants)
    law = model.transforms
    p = point
    gram_a = 1.0 - p.v @ p.v - p.w @ p.w
    gram_b = p.p - p.v @ p.l - p.w @ p.m
    gram_c = 1.0 - p.l @ p.l - p.m @ p.m
    beta1 = p.v - rk * p.w
    beta2 = p.l - rk * p.m
    b_matrix = np.array([[beta1 @ beta1, beta1 @ beta2], [beta1 @ beta2, beta2 @ beta2]])
    f2 = f2_func(p.gamma, p.nu, p.rho, model, constants)
    f2_grad = f2_func_grad(p.gamma, p.nu, p.rho, model, constants)
    h2 = h2_func(p.gamma, p.nu, p.rho, gram_a, gram_b, gram_c, law)
    d_gamma, d_nu, d_rho, d_a, d_b, d_c = h2_func_grad(p.gamma, p.nu, p.rho, gram_a, gram_b, gram_c, law)

    value = (
        - p.u * p.U - p.k * p.K - p.v @ p.V - p.w @ p.W - p.l @ p.L - p.m @ p.M - p.p * p.P
        + p.u + p.k
        + a * rk * (p.v @ p.w + p.l @ p.m)
        + 0.5 * quad_w * (p.w @ p.w + p.m @ p.m)
        + 0.5 * float(np.sum(f2 * b_matrix))
        + 0.5 * h2
    )
    first = f2[0, 0] * beta1 + f2[0, 1] * beta2
    second = f2[0, 1] * beta1 + f2[1, 1] * beta2
    partials = {
        "u": np.array([1.0 - p.U]),
        "v": -p.V + a * rk * p.w + first - d_a * p.v - 0.5 * d_b * p.l,
        "w": -p.W + a * rk * p.v + quad_w * p.w - rk * first - d_a * p.w - 0.5 * d_b * p.m,
        "k": np.array([1.0 - p.K]),
        "l": -p.L + a * rk * p.m + second - d_c * p.l - 0.5 * d_b * p.v,
        "m": -p.M + a * rk * p.l + quad_w * p.m - rk * second - d_c * p.m - 0.5 * d_b * p.w,
        "p": np.array([-p.P + 0.5 * d_b]),
        "gamma": np.array([0.5 * float(np.sum(f2_grad[0] * b_matrix)) + 0.5 * d_gamma]),
        "nu": np.array([0.5 * float(np.sum(f2_grad[1] * b_matrix)) + 0.5 * d_nu]),
        "rho": np.array([0.5 * float(np.sum(f2_grad[2] * b_matrix)) + 0.5 * d_rho]),
    }
    return float(value), partials


def phi2_objective(point: Phi2Point, model: ModelSpec, constants: RSConstants,
                   sample: JointSample) -> Tuple[float, np.ndarray]:
    """Φ₂ and its gradient (ordered as Phi2Point.flatten) on a fixed draw."""
    h, xi, eta = joint_features(sample, constants)
    p = point
    first_local = p.U * h + xi @ p.V + eta @ p.W
    second_local = p.K * h + xi @ p.L + eta @ p.M
    ell, d_x, d_y, d_z = _ell(p.P, first_local, second_local)
    value, partials = _phi2_deterministic(point, model, constants)
    n = len(h)
    partials.update({
        "U": np.array([float(np.mean(d_y * h)) - p.u]),
        "V": xi.T @ d_y / n - p.v,
        "W": eta.T @ d_y / n - p.w,
        "K": np.array([float(np.mean(d_z * h)) - p.k]),
        "L": xi.T @ d_z / n - p.l,
        "M": eta.T @ d_z / n - p.m,
        "P": np.array([float(np.mean(d_x)) - p.p]),
    })
    grad = np.concatenate([np.atleast_1d(partials[name]) for name in Phi2Point.ORDER])
    return float(np.mean(ell)) + value, grad


def phi2_star_point(constants: RSConstants, delta_t: np.ndarray, column: np.ndarray) -> Phi2Point:
    one = phi1_star_point(constants, delta_t, column)
    return Phi2Point(
        u=one.u, v=one.v, w=one.w,
        k=one.u, l=one.v.copy(), m=one.w.copy(),
        p=constants.q_star,
        gamma=one.gamma, nu=0.0, rho=one.gamma,
        U=1.0, V=one.V, W=one.W,
        K=1.0, L=one.V.copy(), M=one.W.copy(),
        P=0.0,
        delta=delta_t,
    )


def phi2_stationary(model: ModelSpec, constants: RSConstants, se_state: SEState, t: int,
                    gh_order: int = DEFAULT_GH_ORDER) -> StationaryReport:
    """Φ₂ at the doubled stationary point (p* = q*, P* = 0, ν* = 0)."""
    pieces = _stationary_pieces(model, constants, se_state, t, gh_order)
    expect = pieces["expect"]
    point = phi2_star_point(constants, pieces["delta_t"], pieces["column"])
    kappa = constants.kappa_star

    ell_value = expect(lambda hh, y: _ell(point.P, y, y)[0])
    deterministic, partial_vectors = _phi2_deterministic(point, model, constants)
    value = ell_value + deterministic

    sech_sq = 1.0 - expect(lambda hh, y: np.tanh(y) ** 2)
    dU = expect(lambda hh, y: hh * _ell(point.P, y, y)[2]) - point.u
    dK = expect(lambda hh, y: hh * _ell(point.P, y, y)[3]) - point.k
    dW = math.sqrt(kappa) * abs(sech_sq - constants.one_minus_q) * math.sqrt(pieces["delta_tt"])
    partials = {name: float(np.linalg.norm(vector)) for name, vector in partial_vectors.items()}
    partials.update({
        "U": abs(dU),
        "K": abs(dK),
        "W": dW,
        "M": dW,
        "P": abs(expect(lambda hh, y: _ell(point.P, y, y)[1]) - point.p),
    })
    logger.debug("phi2 t=%d value=%.12g", t, value)
    return StationaryReport(
        t=t,
        value=float(value),
        target=2.0 * constants.psi_rs,
        partials=partials,
        norm_dV=pieces["norm_dV"],
        point=point,
    )


# --- concavity probes ---------------------------------------------------------

def _inner_conjugate(design: np.ndarray, target: np.ndarray, start: np.ndarray,
                     tol: float = 1e-10, max_iter: int = 100) -> Tuple[float, np.ndarray]:
    """inf_θ E_N[log 2cosh(zᵀθ)] − targetᵀθ by damped Newton."""
    n = design.shape[0]
    theta = start.copy()

    def objective(th):
        return float(np.mean(log_2cosh(design @ th))) - float(target @ th)

    value = objective(theta)
    for _ in range(max_iter):
        local = design @ theta
        grad = design.T @ np.tanh(local) / n - target
        if np.linalg.norm(grad) <= tol:
            return value, theta
        hess = (design * (1.0 / np.cosh(local) ** 2)[:, None]).T @ design / n
        step = -np.linalg.solve(hess, grad)
        size = 1.0
        while size > 1e-12:
            candidate = theta + size * step
            candidate_value = objective(candidate)
            if candidate_value <= value + 1e-4 * size * float(grad @ step):
                break
            size *= 0.5
        theta, value = candidate, candidate_value
    raise NoConvergence("inner infimum over (U, V, W) did not converge",
                        residual=float(np.linalg.norm(grad)), last_iterate=theta.tolist())


def _outer_value(u: float, v: np.ndarray, w: np.ndarray, model: ModelSpec, constants: RSConstants,
                 design: np.ndarray, start: np.ndarray) -> Tuple[float, np.ndarray]:
    """inf over (γ, U, V, W) of Φ₁ at fixed (u, v, w)."""
    a, kappa, rk, quad_w = _constants_terms(constants)
    alpha = 1.0 - v @ v - w @ w
    if not alpha > 0:
        raise DomainError(f"need |v|^2 + |w|^2 < 1, got {1.0 - alpha}")
    conjugate, theta = _inner_conjugate(design, np.concatenate([[u], v, w]), start)

    beta_sq = float((v - rk * w) @ (v - rk * w))
    law = model.transforms
    lo = model.d_bar_plus + default_epsilon(model.d_bar_plus)
    gamma_part = minimize_convex_1d(
        lambda g: 0.5 * f_func(g, model, constants) * beta_sq + 0.5 * h_func(g, alpha, law),
        lambda g: 0.5 * f_func_prime(g, model, constants) * beta_sq + 0.5 * h_func_grad(g, alpha, law)[0],
        lo,
        lo + 1.0 / alpha + 1.0,
        method="golden",
    )
    value = conjugate + u + a * rk * (v @ w) + 0.5 * quad_w * (w @ w) + gamma_part.value
    return float(value), theta


def concavity_probe(model: ModelSpec, constants: RSConstants, se_state: SEState, t: int,
                    directions: Union[int, np.ndarray] = 8, radius: float = 0.05,
                    draws: int = 20_000, seed: int = 0) -> Dict:
    """Compare sup-side values at the stationary (u, v, w) and at radius-steps along directions."""
    sample = sample_joint_law(constants, model.field, se_state, t, draws, seed)
    h, xi, eta = joint_features(sample, constants)
    design = np.column_stack([h, xi, eta])
    column = symmetric_sqrt(sample.delta)[:, t - 1]
    star = phi1_star_point(constants, sample.delta, column)
    start = np.concatenate([[star.U], star.V, star.W])

    base, _ = _outer_value(star.u, star.v, star.w, model, constants, design, start)
    if isinstance(directions, int):
        rng = spawn_streams(seed)["haar"]
        raw = rng.standard_normal((directions, 1 + 2 * t))
    else:
        raw = np.atleast_2d(np.asarray(directions, dtype=float))
    unit = raw / np.linalg.norm(raw, axis=1, keepdims=True)

    values: List[Optional[float]] = []
    decreased: List[Optional[bool]] = []
    for direction in unit:
        u = star.u + radius * direction[0]
        v = star.v + radius * direction[1:1 + t]
        w = star.w + radius * direction[1 + t:]
        try:
            value, _ = _outer_value(u, v, w, model, constants, design, start)
        except (DomainError, NoConvergence) as exc:
            logger.info("concavity probe direction skipped: %s", exc)
            values.append(None)
            decreased.append(None)
            continue
        values.append(value)
        decreased.append(value < base)
    checked = [flag for flag in decreased if flag is not None]
    return {
        "t": t,
        "radius": radius,
        "draws": draws,
        "base": base,
        "values": values,
        "decreased": decreased,
        "all_decreased": bool(checked) and all(checked),
    }
