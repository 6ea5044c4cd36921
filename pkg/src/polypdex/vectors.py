"""Unit-vector math underlying the embedding space.

Embeddings are plain 1-D float arrays. Every retrieval-facing embedding is
L2-normalized, so cosine similarity reduces to a clamped dot product.
"""

from __future__ import annotations

import numpy as np

from .errors import DimMismatchError, ZeroVectorError

# Norms at or below this are treated as zero; normalizing them would amplify
# noise into a garbage direction and later corrupt min-distance terms.
ZERO_NORM_EPS = 1e-12


def l2_normalize(v) -> np.ndarray:
    """Scale ``v`` to unit L2 norm.

    Raises ZeroVectorError when the norm is at or below ZERO_NORM_EPS.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise DimMismatchError(f"expected a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ZeroVectorError("vector has non-finite entries")
    norm = float(np.linalg.norm(v))
    if norm <= ZERO_NORM_EPS:
        raise ZeroVectorError(f"norm {norm} is at or below {ZERO_NORM_EPS}")
    return v / norm


def is_normalized(v, tol: float = 1e-4) -> bool:
    """True when ``v`` has unit norm within ``tol``."""
    return abs(float(np.linalg.norm(np.asarray(v, dtype=np.float64))) - 1.0) <= tol


def cosine_similarity(a, b) -> float:
    """Dot product of two unit vectors, clamped to [-1, 1] against rounding."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.clip(np.dot(a, b), -1.0, 1.0))


def cosine_many(matrix: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise cosine of a stack of unit vectors against a unit query."""
    matrix = np.asarray(matrix, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != q.shape[0]:
        raise DimMismatchError(f"matrix {matrix.shape} incompatible with query {q.shape}")
    return np.clip(matrix @ q, -1.0, 1.0)
