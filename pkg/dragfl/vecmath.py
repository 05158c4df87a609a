"""
Flat-vector arithmetic
----------------------
Every model, client update, reference direction and aggregate in the
simulator is a ``ParamVector``: a 1-D float64 numpy array. The helpers below
are the only place raw numerics on those vectors live; all of them are pure
and return fresh arrays.
"""

from typing import Iterable, Sequence

import numpy as np
import numpy.typing as npt

from .errors import DegenerateVectorError, DimensionError, EmptyInputError, NonFiniteError

ParamVector = npt.NDArray[np.float64]

# norms at or below this are treated as zero vectors
EPS = 1e-12


def as_vector(values: Iterable[float] | np.ndarray) -> ParamVector:
    """Copy ``values`` into a finite 1-D float64 vector of length >= 1."""
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"expected a flat vector, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionError("vector must have at least one entry")
    return _finite(arr)


def zeros(d: int) -> ParamVector:
    if d < 1:
        raise DimensionError(f"dimension must be >= 1, got {d}")
    return np.zeros(d, dtype=np.float64)


def _finite(arr: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("non-finite entry in vector")
    return arr


def _same_length(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")


def inner(a: ParamVector, b: ParamVector) -> float:
    _same_length(a, b)
    return float(np.dot(a, b))


def norm(a: ParamVector) -> float:
    return float(np.linalg.norm(a))


def scale(a: ParamVector, c: float) -> ParamVector:
    return _finite(np.multiply(a, c))


def axpy(a: ParamVector, c: float, b: ParamVector) -> ParamVector:
    """Return ``a + c*b``."""
    _same_length(a, b)
    return _finite(a + c * b)


def cosine(a: ParamVector, b: ParamVector) -> float:
    """Cosine of the angle between ``a`` and ``b``, clamped to [-1, 1]."""
    _same_length(a, b)
    na, nb = norm(a), norm(b)
    if na <= EPS or nb <= EPS:
        raise DegenerateVectorError(f"cosine undefined for near-zero vector (norms {na:.3g}, {nb:.3g})")
    return float(np.clip(inner(a, b) / (na * nb), -1.0, 1.0))


def mean(vectors: Sequence[ParamVector]) -> ParamVector:
    """Entrywise mean in the given order; callers fix the order for reproducibility."""
    if len(vectors) == 0:
        raise EmptyInputError("mean of an empty list of vectors")
    first = vectors[0]
    for v in vectors[1:]:
        _same_length(first, v)
    return _finite(np.mean(np.stack(vectors), axis=0))
