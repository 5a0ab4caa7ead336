"""Numerical building blocks shared by every stage."""
from .quadrature import (
    GHQuadrature,
    gh_standard_normal,
    gauss_legendre,
    chebyshev_semicircle,
    expect_field_gaussian,
    expect_field_gaussian_pair,
    MAX_QUADRATURE_ORDER,
)
from .minimize import minimize_convex_1d, solve_monotone_decreasing, ConvexMinimum
from .rng import derive_seeds, spawn_streams, generator, STREAM_NAMES
from .logsumexp import StreamingLogSumExp

__all__ = [
    "GHQuadrature",
    "gh_standard_normal",
    "gauss_legendre",
    "chebyshev_semicircle",
    "expect_field_gaussian",
    "expect_field_gaussian_pair",
    "MAX_QUADRATURE_ORDER",
    "minimize_convex_1d",
    "solve_monotone_decreasing",
    "ConvexMinimum",
    "derive_seeds",
    "spawn_streams",
    "generator",
    "STREAM_NAMES",
    "StreamingLogSumExp",
]
