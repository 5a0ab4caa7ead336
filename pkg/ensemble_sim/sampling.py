"""Finite-n orthogonally invariant couplings."""
import logging
import os
import sys

import numpy as np
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from models import CouplingSample, ModelSpec
from numerics import spawn_streams

logger = logging.getLogger(__name__)

PLACEMENTS = ("quantile", "iid")


def sample_haar(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar orthogonal matrix from the sign-corrected QR of a Gaussian matrix."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    gaussian = rng.standard_normal((n, n))
    q, r = np.linalg.qr(gaussian)
    signs = np.where(np.diag(r) >= 0, 1.0, -1.0)
    return q * signs[None, :]


def midpoint_quantiles(n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) / n


def sample_model(model: ModelSpec, n: int, seed: int, placement: str = "quantile") -> CouplingSample:
    """Draw (D, O, h) for one replicate; every piece uses its own derived stream."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if placement not in PLACEMENTS:
        raise ValueError(f"Unknown placement: {placement}")
    streams = spawn_streams(seed)

    if placement == "quantile":
        u = midpoint_quantiles(n)
        d = np.asarray(model.spectral.quantile(u), dtype=float)
        h = np.asarray(model.field.quantile(u), dtype=float)
    else:
        d = np.asarray(model.spectral.sample(n, streams["eigenvalues"]), dtype=float)
        h = np.asarray(model.field.sample(n, streams["field"]), dtype=float)
    o = sample_haar(n, streams["haar"])
    logger.debug("sampled n=%d placement=%s seed=%d", n, placement, seed)
    return CouplingSample(n=n, d=d, o=o, h=h, seed=seed, placement=placement)


def orthogonality_error(o: np.ndarray) -> float:
    return float(np.linalg.norm(o.T @ o - np.eye(o.shape[0])))
