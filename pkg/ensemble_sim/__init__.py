"""Finite-n couplings, memory-free AMP and its empirical checks."""
from .sampling import sample_haar, sample_model, orthogonality_error, midpoint_quantiles
from .amp import (
    resolvent_diagonal,
    coupling_matvec,
    run_amp,
    magnetization,
    tap_residual,
    tap_residual_curve,
    freeness_check,
    freeness_functions,
    gram_deviations,
    row_moment_check,
    trace_summary,
    dump_iterates,
)

__all__ = [
    "sample_haar",
    "sample_model",
    "orthogonality_error",
    "midpoint_quantiles",
    "resolvent_diagonal",
    "coupling_matvec",
    "run_amp",
    "magnetization",
    "tap_residual",
    "tap_residual_curve",
    "freeness_check",
    "freeness_functions",
    "gram_deviations",
    "row_moment_check",
    "trace_summary",
    "dump_iterates",
]
