"""Dense real-matrix substrate.

Every array flowing through the library is a 2-D, C-contiguous ndarray in
one of two precisions (float64 by default, float32 for performance runs).
This module wraps the handful of operations everything else is written
against: validation/coercion, matrix product, elementwise product, and a
symmetric-positive-definite solve.  All public operations reject non-finite
results so NaN/Inf cannot propagate silently.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

DTYPES = {"float64": np.float64, "float32": np.float32}
DEFAULT_DTYPE = np.float64


class ShapeMismatchError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class NotSPDError(ValueError):
    """A matrix expected to be symmetric positive definite is not."""


class NonFiniteError(FloatingPointError):
    """NaN or Inf appeared in an operand or a result."""


def resolve_dtype(dtype) -> np.dtype:
    """Map a precision name or dtype-like to one of the two supported dtypes."""
    if isinstance(dtype, str):
        try:
            return np.dtype(DTYPES[dtype])
        except KeyError:
            raise ValueError(f"unsupported precision {dtype!r}; use 'float64' or 'float32'")
    dt = np.dtype(dtype)
    if dt not in (np.dtype(np.float64), np.dtype(np.float32)):
        raise ValueError(f"unsupported dtype {dt}; use float64 or float32")
    return dt


def as_matrix(a, dtype=None, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D C-order array, casting only when needed."""
    arr = np.asarray(a)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ShapeMismatchError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if dtype is not None:
        arr = np.ascontiguousarray(arr, dtype=resolve_dtype(dtype))
    else:
        arr = np.ascontiguousarray(arr, dtype=DEFAULT_DTYPE if arr.dtype.kind != "f" else arr.dtype)
    ensure_finite(arr, name)
    return arr


def ensure_finite(a: np.ndarray, name: str = "result") -> np.ndarray:
    if not np.isfinite(a).all():
        raise NonFiniteError(f"{name} contains NaN or Inf")
    return a


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with shape validation and a finite-result check.

    Summation order is BLAS-determined but fixed for identical inputs in the
    same process, so repeated calls are bit-identical.
    """
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeMismatchError(f"matmul needs 2-D operands, got {a.ndim}-D and {b.ndim}-D")
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    out = a @ b
    return ensure_finite(out, "matmul result")


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise product of two identically shaped matrices."""
    if a.shape != b.shape:
        raise ShapeMismatchError(f"hadamard needs identical shapes, got {a.shape} and {b.shape}")
    out = a * b
    return ensure_finite(out, "hadamard result")


def spd_solve(s: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve s @ x = rhs for symmetric positive definite s via Cholesky.

    Never forms the explicit inverse.  A non-positive pivot is reported as
    NotSPDError, distinct from shape errors.
    """
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ShapeMismatchError(f"spd_solve needs a square matrix, got {s.shape}")
    r = np.asarray(rhs)
    if r.ndim == 1:
        r = r.reshape(-1, 1)
    if r.shape[0] != s.shape[0]:
        raise ShapeMismatchError(f"rhs has {r.shape[0]} rows, system has {s.shape[0]}")
    try:
        factor = scipy.linalg.cho_factor(s, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotSPDError(f"matrix is not positive definite: {exc}") from exc
    x = scipy.linalg.cho_solve(factor, r, check_finite=False)
    return ensure_finite(x, "spd_solve result")
