"""Unit-vector primitives shared by every other module.

Embeddings are 1-D float32 numpy arrays, L2-normalized at creation so that
dot products are cosine similarities in [-1, 1]. All reductions (norms,
dots) accumulate in float64; results are clamped to absorb rounding.
"""

import numpy as np

from .errors import CapmatchError, DimMismatchError, NonFiniteError, ZeroVectorError

UNIT_NORM_TOL = 1e-5
ZERO_NORM_THRESHOLD = 1e-12


def l2_normalize(values) -> np.ndarray:
    """Scale a raw real vector to unit L2 norm.

    Args:
        values: sequence or 1-D array with at least one entry.

    Returns:
        float32 array of the same length with ``|norm - 1| <= 1e-5``.

    Raises:
        NonFiniteError: any entry is NaN or Inf.
        ZeroVectorError: the norm is below 1e-12.
    """
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise ZeroVectorError("cannot normalize an empty vector")
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("vector contains NaN or Inf")
    norm = float(np.sqrt(np.dot(v, v)))
    if norm < ZERO_NORM_THRESHOLD:
        raise ZeroVectorError(f"vector norm {norm} below {ZERO_NORM_THRESHOLD}")
    return (v / norm).astype(np.float32)


def dot_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of two unit vectors, clamped to [-1, 1].

    Accumulation happens in float64 regardless of input precision; the same
    reduction is applied to both orders, so the result is symmetric.

    Raises:
        DimMismatchError: the vectors have different lengths.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimMismatchError(f"dims differ: {a.shape} vs {b.shape}")
    value = float(np.dot(a.astype(np.float64), b.astype(np.float64)))
    return min(1.0, max(-1.0, value))


def check_embedding(v, dim: int | None = None) -> np.ndarray:
    """Validate an embedding at a module boundary.

    Checks finiteness, unit norm within 1e-5 and, when given, the expected
    dimension. Returns the vector as a float32 array.
    """
    arr = np.asarray(v, dtype=np.float32).reshape(-1)
    if dim is not None and arr.size != dim:
        raise DimMismatchError(f"expected dim {dim}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("embedding contains NaN or Inf")
    norm = float(np.sqrt(np.dot(arr.astype(np.float64), arr.astype(np.float64))))
    if abs(norm - 1.0) > UNIT_NORM_TOL:
        raise CapmatchError(f"embedding norm {norm} is not 1 within {UNIT_NORM_TOL}")
    return arr
