"""State evolution of the memory-free AMP iteration."""
from .recursion import (
    amp_denoiser,
    amp_denoiser_derivative,
    correlated_pair_expectation,
    g_map,
    g_prime,
    initial_state,
    se_advance,
    run_state_evolution,
    se_limit_check,
    write_csv,
)

__all__ = [
    "amp_denoiser",
    "amp_denoiser_derivative",
    "correlated_pair_expectation",
    "g_map",
    "g_prime",
    "initial_state",
    "se_advance",
    "run_state_evolution",
    "se_limit_check",
    "write_csv",
]
