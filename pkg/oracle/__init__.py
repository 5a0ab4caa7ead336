"""Finite-n ground truth: exact enumeration and the spherical dual."""
from .enumeration import (
    MAX_ENUMERATION_N,
    exact_log_z,
    enumerate_log_partition,
    brute_force_log_partition,
    quenched_free_energy,
    annealed_h0,
    summarize,
    enumeration_row,
    gray_code_flips,
    to_gray_code,
)
from .spherical import SPHERE_EPSILON, spherical_finite_n, spherical_finite_n_detailed

__all__ = [
    "MAX_ENUMERATION_N",
    "exact_log_z",
    "enumerate_log_partition",
    "brute_force_log_partition",
    "quenched_free_energy",
    "annealed_h0",
    "summarize",
    "enumeration_row",
    "gray_code_flips",
    "to_gray_code",
    "SPHERE_EPSILON",
    "spherical_finite_n",
    "spherical_finite_n_detailed",
]
