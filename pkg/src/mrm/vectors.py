"""Small vector helpers used by every embedding-based scorer."""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, ZeroVector


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors, in [-1, 1].

    Identical inputs return exactly 1.0 so downstream rescaled scores hit
    their upper bound without float fuzz.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"vector dims {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine undefined for the zero vector")
    if np.array_equal(a, b):
        return 1.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def rescaled_cosine(a, b) -> float:
    """Cosine mapped from [-1, 1] onto [0, 1]."""
    return (cosine_similarity(a, b) + 1.0) / 2.0
