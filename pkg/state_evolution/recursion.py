"""State evolution for the memory-free AMP iteration.

The Gram matrix Δ_t of (𝖷₁..𝖷_t) is built one column at a time. Each entry is
an expectation over a bivariate Gaussian pair (𝖸′, 𝖸″) with variances σ*² and
covariance κ*δ, represented through independent 𝖦, 𝖦′, 𝖦″ as
𝖸′ = √(κ*δ)𝖦 + √(σ*²−κ*δ)𝖦′, 𝖸″ = √(κ*δ)𝖦 + √(σ*²−κ*δ)𝖦″.
Since 𝖦′ and 𝖦″ enter only through their own factor, the (𝖦,𝖦′,𝖦″) tensor rule
reduces to squaring the conditional mean over 𝖦′.
"""
import csv
import logging
import math
import os
import sys
from typing import Callable, Dict, Optional

import numpy as np
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from errors import DomainError
from models import RSConstants, SEState
from numerics import gh_standard_normal
from spectral_law import FieldLaw

logger = logging.getLogger(__name__)

DEFAULT_GH_ORDER = 60
_RANGE_SLACK = 1e-12


def amp_denoiser(constants: RSConstants) -> Callable:
    """f(h, y) = (1−q*)⁻¹ tanh(h+y) − y."""
    scale = 1.0 / constants.one_minus_q
    return lambda h, y: scale * np.tanh(h + y) - y


def amp_denoiser_derivative(constants: RSConstants) -> Callable:
    """∂_y f(h, y) = (1−q*)⁻¹ sech²(h+y) − 1."""
    scale = 1.0 / constants.one_minus_q
    return lambda h, y: scale / np.cosh(h + y) ** 2 - 1.0


def _check_delta(constants: RSConstants, delta: float) -> float:
    if delta < -_RANGE_SLACK or delta > constants.delta_star + _RANGE_SLACK:
        raise DomainError(f"delta={delta} outside [0, delta*={constants.delta_star}]")
    return min(max(delta, 0.0), constants.delta_star)


def correlated_pair_expectation(
    constants: RSConstants,
    field: FieldLaw,
    covariance: float,
    func: Callable,
    gh_order: int = DEFAULT_GH_ORDER,
    other: Optional[Callable] = None,
) -> float:
    """E[func(𝖧,𝖸′)·other(𝖧,𝖸″)] for Var 𝖸′ = Var 𝖸″ = σ*² and Cov = ``covariance``."""
    rule = gh_standard_normal(gh_order)
    nodes, weights = field.quadrature()
    variance = constants.sigma_star_sq
    common = math.sqrt(min(max(covariance, 0.0), variance))
    private = math.sqrt(max(variance - covariance, 0.0))

    h = nodes[:, None, None]
    y = common * rule.z[None, :, None] + private * rule.z[None, None, :]
    first = func(h, y) @ rule.w
    second = first if other is None else other(h, y) @ rule.w
    return float(weights @ (first * second) @ rule.w)


def g_map(constants: RSConstants, delta: float, field: FieldLaw, gh_order: int = DEFAULT_GH_ORDER) -> float:
    """g(δ) = E[f(𝖧,𝖸′) f(𝖧,𝖸″)] with Cov(𝖸′,𝖸″) = κ*δ, clamped to [0, δ*]."""
    delta = _check_delta(constants, delta)
    if constants.sigma_star_sq == 0.0:
        return 0.0
    value = correlated_pair_expectation(
        constants, field, constants.kappa_star * delta, amp_denoiser(constants), gh_order
    )
    return min(max(value, 0.0), constants.delta_star)


def g_prime(constants: RSConstants, delta: float, field: FieldLaw, gh_order: int = DEFAULT_GH_ORDER) -> float:
    """g′(δ) = κ* E[∂_y f(𝖧,𝖸′) ∂_y f(𝖧,𝖸″)]."""
    delta = _check_delta(constants, delta)
    if constants.sigma_star_sq == 0.0:
        return 0.0
    return constants.kappa_star * correlated_pair_expectation(
        constants, field, constants.kappa_star * delta, amp_denoiser_derivative(constants), gh_order
    )


def initial_state(constants: RSConstants, field: FieldLaw, gh_order: int = DEFAULT_GH_ORDER) -> SEState:
    return SEState(t=0, delta=np.zeros((0, 0)), constants=constants, field=field, gh_order=gh_order)


def se_advance(state: SEState) -> SEState:
    """Δ_t → Δ_{t+1}: append the column δ_{s,t+1} = g(δ_{s−1,t}), δ_{0,t} = 0."""
    gh_standard_normal(state.gh_order)  # order guard
    t = state.t
    constants = state.constants
    new = np.zeros((t + 1, t + 1))
    new[:t, :t] = state.delta
    for s in range(1, t + 1):
        previous = 0.0 if s == 1 else state.delta[s - 2, t - 1]
        entry = g_map(constants, previous, state.field, state.gh_order)
        new[s - 1, t] = entry
        new[t, s - 1] = entry
    new[t, t] = constants.delta_star
    return SEState(t=t + 1, delta=new, constants=constants, field=state.field, gh_order=state.gh_order)


def run_state_evolution(
    constants: RSConstants, field: FieldLaw, t_max: int, gh_order: int = DEFAULT_GH_ORDER
) -> SEState:
    state = initial_state(constants, field, gh_order)
    for _ in range(t_max):
        state = se_advance(state)
    min_eig = float(np.linalg.eigvalsh(state.delta).min()) if state.t else 0.0
    if min_eig < -1e-10:
        logger.warning("Delta_%d has eigenvalue %.3g < -1e-10", state.t, min_eig)
    return state


def se_limit_check(state: SEState, small_beta: bool = True, noise_floor: float = 1e-13) -> Dict:
    """Convergence report for δ_{st} → δ*."""
    t = state.t
    constants = state.constants
    if t < 3:
        return {"t": t, "degenerate": True}

    delta_star = constants.delta_star
    tail = state.delta[t - 3:, t - 3:]
    max_tail_deviation = float(np.max(np.abs(tail - delta_star)))

    gaps = np.array([delta_star - state.delta[k - 1, k] for k in range(1, t)])
    usable = np.where(gaps > noise_floor)[0]
    if len(usable) >= 2:
        slope = np.polyfit(usable.astype(float), np.log(gaps[usable]), 1)[0]
        decay_ratio = float(math.exp(slope))
    else:
        decay_ratio = 0.0

    last_gap = float(gaps[-1])
    bound = 0.5 ** (t - 1) * delta_star + 1e-9
    report = {
        "t": t,
        "degenerate": False,
        "delta_star": delta_star,
        "max_tail_deviation": max_tail_deviation,
        "offdiagonal_gaps": gaps.tolist(),
        "decay_ratio": decay_ratio,
        "last_gap": last_gap,
        "bound": bound,
        "kappa_delta_last": constants.kappa_star * float(state.delta[t - 2, t - 1]),
        "sigma_star_sq": constants.sigma_star_sq,
        "min_eigenvalue": float(np.linalg.eigvalsh(state.delta).min()),
    }
    if small_beta:
        report["bound_holds"] = abs(last_gap) <= bound
        if not report["bound_holds"]:
            logger.warning("SE gap %.3g exceeds (1/2)^(t-1) bound %.3g at t=%d", last_gap, bound, t)
    return report


def write_csv(state: SEState, path: str) -> str:
    """Write Δ_t as a CSV matrix with a header row s=1..t."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["s"] + [str(j + 1) for j in range(state.t)])
        for i, row in enumerate(state.rows()):
            writer.writerow([str(i + 1)] + [repr(v) for v in row])
    return path
