"""Spectral laws, field laws and free-probability transforms."""
from .laws import (
    SpectralLaw,
    Semicircle,
    Rademacher,
    DiscreteEigenvalues,
    ShiftedScaled,
    rescaled,
    spectral_law_from_dict,
    DEFAULT_SPECTRAL_NODES,
)
from .field import FieldLaw, PointMass, DiscreteAtoms, Gaussian, field_law_from_dict, DEFAULT_FIELD_ORDER
from .transforms import (
    TransformCache,
    transform_cache,
    cauchy,
    cauchy_inverse,
    r_transform,
    r_prime,
    r_second,
    free_cumulants,
    Standardized,
    standardize,
    is_standardized,
)

__all__ = [
    "SpectralLaw",
    "Semicircle",
    "Rademacher",
    "DiscreteEigenvalues",
    "ShiftedScaled",
    "rescaled",
    "spectral_law_from_dict",
    "DEFAULT_SPECTRAL_NODES",
    "FieldLaw",
    "PointMass",
    "DiscreteAtoms",
    "Gaussian",
    "field_law_from_dict",
    "DEFAULT_FIELD_ORDER",
    "TransformCache",
    "transform_cache",
    "cauchy",
    "cauchy_inverse",
    "r_transform",
    "r_prime",
    "r_second",
    "free_cumulants",
    "Standardized",
    "standardize",
    "is_standardized",
]
