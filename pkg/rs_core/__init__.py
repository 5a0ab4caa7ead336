"""Replica-symmetric fixed point and free energies."""
from .fixed_point import (
    FixedPointResult,
    q_map,
    solve_q_star,
    solve_q_star_detailed,
    warn_if_outside_regime,
    DEFAULT_GH_ORDER,
)
from .free_energy import (
    rs_constants,
    psi_rs,
    psi_rs_sphere,
    sphere_minimum,
    sphere_epsilon,
    small_beta_expansion,
    log_2cosh,
)

__all__ = [
    "FixedPointResult",
    "q_map",
    "solve_q_star",
    "solve_q_star_detailed",
    "warn_if_outside_regime",
    "DEFAULT_GH_ORDER",
    "rs_constants",
    "psi_rs",
    "psi_rs_sphere",
    "sphere_minimum",
    "sphere_epsilon",
    "small_beta_expansion",
    "log_2cosh",
]
