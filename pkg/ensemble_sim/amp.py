"""Memory-free AMP on a sampled coupling, and empirical checks against theory."""
import json
import logging
import math
import os
import sys
from typing import Callable, Dict, List, Optional

import numpy as np
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from models import AMPTrace, CouplingSample, ModelSpec, RSConstants, SEState
from numerics import spawn_streams

logger = logging.getLogger(__name__)


def resolvent_diagonal(sample: CouplingSample, model: ModelSpec, constants: RSConstants) -> np.ndarray:
    """Λ_ii = (1−q*)⁻¹(λ* − βd_i)⁻¹ − 1."""
    return 1.0 / (constants.one_minus_q * (constants.lambda_star - model.beta * sample.d)) - 1.0


def coupling_matvec(sample: CouplingSample, model: ModelSpec, vector: np.ndarray) -> np.ndarray:
    """J̄v = Oᵀ(βD)(Ov) without forming J̄."""
    return sample.o.T @ (model.beta * sample.d * (sample.o @ vector))


def run_amp(
    sample: CouplingSample,
    model: ModelSpec,
    constants: RSConstants,
    T: int,
    rng: Optional[np.random.Generator] = None,
) -> AMPTrace:
    """x^t = (1−q*)⁻¹tanh(h+y^{t−1}) − y^{t−1}, s^t = Ox^t, y^t = OᵀΛs^t."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    n = sample.n
    if rng is None:
        rng = spawn_streams(sample.seed)["init"]

    degenerate = constants.sigma_star_sq == 0.0 and model.field.is_zero
    if degenerate:
        logger.warning("degenerate AMP initialization: sigma*^2 = 0 with zero field; trace is trivial")

    lam = resolvent_diagonal(sample, model, constants)
    scale = 1.0 / constants.one_minus_q
    x = np.zeros((n, T))
    s = np.zeros((n, T))
    y = np.zeros((n, T + 1))
    y[:, 0] = constants.sigma_star * rng.standard_normal(n)

    for t in range(1, T + 1):
        x[:, t - 1] = scale * np.tanh(sample.h + y[:, t - 1]) - y[:, t - 1]
        s[:, t - 1] = sample.o @ x[:, t - 1]
        y[:, t] = sample.o.T @ (lam * s[:, t - 1])

    y_run = y[:, 1:]
    return AMPTrace(
        x=x,
        y=y,
        s=s,
        gram_xx=x.T @ x / n,
        gram_yy=y_run.T @ y_run / n,
        gram_xy=x.T @ y_run / n,
        seed=sample.seed,
        degenerate=degenerate,
    )


def magnetization(trace: AMPTrace, sample: CouplingSample, T: Optional[int] = None) -> np.ndarray:
    """m^T = tanh(h + y^{T−1}) = (1−q*)(x^T + y^{T−1})."""
    T = trace.T if T is None else T
    return np.tanh(sample.h + trace.y[:, T - 1])


def tap_residual(
    trace: AMPTrace,
    sample: CouplingSample,
    model: ModelSpec,
    constants: RSConstants,
    T: Optional[int] = None,
) -> float:
    """n^{−1/2}‖m − tanh(h + J̄m − R̄(1−q*)m)‖ at m = m^T."""
    T = trace.T if T is None else T
    if T < 2:
        raise ValueError(f"TAP residual needs T >= 2, got {T}")
    m = magnetization(trace, sample, T)
    local = sample.h + coupling_matvec(sample, model, m) - constants.a_star * m
    return float(np.linalg.norm(m - np.tanh(local)) / math.sqrt(sample.n))


def tap_residual_curve(trace: AMPTrace, sample: CouplingSample, model: ModelSpec,
                       constants: RSConstants) -> List[float]:
    return [tap_residual(trace, sample, model, constants, T) for T in range(2, trace.T + 1)]


def freeness_check(
    trace: AMPTrace,
    sample: CouplingSample,
    model: ModelSpec,
    se_state: SEState,
    f: Callable[[np.ndarray], np.ndarray],
) -> np.ndarray:
    """n⁻¹SᵀF(D̄)S − Δ_T ∫f dμ_D̄."""
    T = trace.T
    weights = f(model.beta * sample.d)
    empirical = trace.s.T @ (weights[:, None] * trace.s) / sample.n
    target = se_state.leading(T) * model.transforms.expect(f)
    return empirical - target


def gram_deviations(trace: AMPTrace, se_state: SEState) -> Dict[str, float]:
    delta = se_state.leading(trace.T)
    kappa = se_state.constants.kappa_star
    return {
        "xx": float(np.max(np.abs(trace.gram_xx - delta))),
        "yy": float(np.max(np.abs(trace.gram_yy - kappa * delta))),
        "xy": float(np.max(np.abs(trace.gram_xy))),
    }


def _gaussian_moment(sigma: float, p: int) -> float:
    if p % 2:
        return 0.0
    return sigma ** p * float(np.prod(np.arange(p - 1, 0, -2))) if p else 1.0


def row_moment_check(trace: AMPTrace, sample: CouplingSample, model: ModelSpec,
                     constants: RSConstants, t: int, max_order: int = 4) -> Dict:
    """Mixed moments E[h^a y_t^b], a+b ≤ 4, versus 𝖧 ⊥ 𝖸_t ~ N(0, σ*²), in MC sigmas."""
    h = sample.h
    y = trace.y[:, t]
    sigma = constants.sigma_star
    z_scores = {}
    for a in range(max_order + 1):
        for b in range(max_order + 1 - a):
            if a + b == 0:
                continue
            empirical = float(np.mean(h ** a * y ** b))
            expected = model.field.moment(a) * _gaussian_moment(sigma, b)
            second = model.field.moment(2 * a) * _gaussian_moment(sigma, 2 * b)
            spread = math.sqrt(max(second - expected ** 2, 0.0) / sample.n)
            if spread == 0.0:
                z_scores[f"{a},{b}"] = 0.0 if abs(empirical - expected) < 1e-12 else math.inf
            else:
                z_scores[f"{a},{b}"] = (empirical - expected) / spread
    return {"t": t, "z_scores": z_scores, "max_abs_z": max(abs(z) for z in z_scores.values())}


def trace_summary(trace: AMPTrace, sample: CouplingSample, model: ModelSpec,
                  constants: RSConstants, se_state: SEState) -> Dict:
    freeness = {
        name: float(np.max(np.abs(freeness_check(trace, sample, model, se_state, f))))
        for name, f in freeness_functions(constants).items()
    }
    return {
        "n": sample.n,
        "T": trace.T,
        "seed": sample.seed,
        "degenerate": trace.degenerate,
        "gram_xx": trace.gram_xx.tolist(),
        "gram_yy": trace.gram_yy.tolist(),
        "gram_xy": trace.gram_xy.tolist(),
        "gram_deviation": gram_deviations(trace, se_state),
        "tap_residuals": tap_residual_curve(trace, sample, model, constants) if trace.T >= 2 else [],
        "freeness_deviation": freeness,
    }


def freeness_functions(constants: RSConstants) -> Dict[str, Callable]:
    lam = constants.lambda_star
    return {
        "x": lambda x: x,
        "x^2": lambda x: x ** 2,
        "resolvent": lambda x: 1.0 / (lam - x),
    }


def dump_iterates(trace: AMPTrace, path: str) -> str:
    """Raw iterates [x | y | s] as flat float64 row-major binary plus a JSON sidecar."""
    data = np.ascontiguousarray(np.hstack([trace.x, trace.y, trace.s]), dtype=np.float64)
    data.tofile(path)
    sidecar = {
        "shape": list(data.shape),
        "dtype": "float64",
        "order": "C",
        "columns": {
            "x": [0, trace.T],
            "y": [trace.T, 2 * trace.T + 1],
            "s": [2 * trace.T + 1, 3 * trace.T + 1],
        },
        "seed": trace.seed,
    }
    with open(path + ".json", "w", encoding="utf-8") as handle:
        json.dump(sidecar, handle, indent=2, sort_keys=True)
    return path
