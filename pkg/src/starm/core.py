"""Dense order-p tensor primitives: slicing, folding, mode products, norms.

Tensors are plain numpy arrays of order p >= 1. All index conventions are
column-major: vectorization stacks the columns of each frontal slice, then
the frontal slices themselves, last trailing index slowest. Modes are
numbered from 1 (mode 1 = first axis), so "mode-3 product" acts on axis 2.

Slicing helpers return copies, not views; that is the contract the rest of
the library relies on.
"""

from __future__ import annotations

import math

import numpy as np

# Shape products must stay clear of the int64 index range.
MAX_ELEMENTS = 2**62


def check_shape(shape) -> tuple[int, ...]:
    """Validate a tensor shape: positive dims whose product fits the index type."""
    dims = tuple(int(d) for d in shape)
    if len(dims) < 1:
        raise ValueError("tensor order must be at least 1")
    if any(d < 1 for d in dims):
        raise ValueError(f"all dimensions must be >= 1, got {dims}")
    if math.prod(dims) > MAX_ELEMENTS:
        raise ValueError(f"element count of shape {dims} overflows the index type")
    return dims


def as_tensor(a) -> np.ndarray:
    """Coerce to a float64/complex128 ndarray and validate its shape."""
    arr = np.asarray(a)
    if not np.issubdtype(arr.dtype, np.number):
        raise ValueError(f"tensor entries must be numeric, got dtype {arr.dtype}")
    arr = arr.astype(np.complex128 if np.iscomplexobj(arr) else np.float64, copy=False)
    check_shape(arr.shape)
    return arr


def _check_mode(a: np.ndarray, mode: int) -> int:
    if not 1 <= mode <= a.ndim:
        raise ValueError(f"mode {mode} invalid for an order-{a.ndim} tensor")
    return mode - 1


def frontal_slice(a: np.ndarray, idx=()) -> np.ndarray:
    """Return the n1 x n2 frontal slice at the fixed trailing indices (a copy)."""
    a = as_tensor(a)
    if a.ndim < 2:
        raise ValueError("frontal slices require order >= 2")
    idx = tuple(int(i) for i in np.asarray(idx, dtype=int).ravel())
    if len(idx) != a.ndim - 2:
        raise IndexError(f"expected {a.ndim - 2} trailing indices, got {len(idx)}")
    for i, (j, n) in enumerate(zip(idx, a.shape[2:])):
        if not 0 <= j < n:
            raise IndexError(f"trailing index {j} out of range for dimension {i + 3} of size {n}")
    return a[(slice(None), slice(None)) + idx].copy()


def lateral_slice(a: np.ndarray, j: int) -> np.ndarray:
    """Return slice j along dimension 2, keeping order p with n2 = 1 (a copy)."""
    a = as_tensor(a)
    if a.ndim < 2:
        raise ValueError("lateral slices require order >= 2")
    if not 0 <= j < a.shape[1]:
        raise IndexError(f"lateral index {j} out of range for n2 = {a.shape[1]}")
    return a[:, j : j + 1].copy()


def tube(a: np.ndarray, i: int, j: int) -> np.ndarray:
    """Return the (i, j) tube, a 1 x 1 x n3 x ... x np tensor (a copy)."""
    a = as_tensor(a)
    if a.ndim < 2:
        raise ValueError("tubes require order >= 2")
    if not 0 <= i < a.shape[0]:
        raise IndexError(f"row index {i} out of range for n1 = {a.shape[0]}")
    if not 0 <= j < a.shape[1]:
        raise IndexError(f"column index {j} out of range for n2 = {a.shape[1]}")
    return a[i : i + 1, j : j + 1].copy()


def vectorize(a: np.ndarray) -> np.ndarray:
    """Column-major vectorization: columns of each frontal slice stacked, slices stacked in trailing-index order."""
    return np.reshape(as_tensor(a), -1, order="F")


def mode_k_unfold(a: np.ndarray, mode: int) -> np.ndarray:
    """Unfold along `mode`: rows are that mode, columns are the mode-k fibers.

    Fiber columns are ordered column-major over the remaining modes in
    ascending mode order (lowest remaining mode fastest), the same ordering
    vectorize induces. mode_k_fold with the same mode inverts this exactly.
    """
    a = as_tensor(a)
    ax = _check_mode(a, mode)
    return np.moveaxis(a, ax, 0).reshape((a.shape[ax], -1), order="F")


def mode_k_fold(mat: np.ndarray, mode: int, shape) -> np.ndarray:
    """Inverse of mode_k_unfold for the given target shape."""
    mat = np.asarray(mat)
    dims = check_shape(shape)
    if not 1 <= mode <= len(dims):
        raise ValueError(f"mode {mode} invalid for an order-{len(dims)} target shape")
    ax = mode - 1
    rest = math.prod(dims) // dims[ax]
    if mat.shape != (dims[ax], rest):
        raise ValueError(
            f"matrix of shape {mat.shape} cannot fold into {tuple(dims)} along mode {mode}"
        )
    moved = (dims[ax],) + dims[:ax] + dims[ax + 1 :]
    return np.moveaxis(mat.reshape(moved, order="F"), 0, ax)


def mode_k_product(a: np.ndarray, mat: np.ndarray, mode: int) -> np.ndarray:
    """Apply a matrix along one mode: fold(mat @ unfold(a, mode))."""
    a = as_tensor(a)
    mat = np.asarray(mat)
    ax = _check_mode(a, mode)
    if mat.ndim != 2 or mat.shape[1] != a.shape[ax]:
        raise ValueError(
            f"matrix of shape {mat.shape} does not act on mode {mode} of size {a.shape[ax]}"
        )
    new_shape = a.shape[:ax] + (mat.shape[0],) + a.shape[ax + 1 :]
    return mode_k_fold(mat @ mode_k_unfold(a, mode), mode, new_shape)


def frobenius_norm(a: np.ndarray) -> float:
    """Square root of the sum of squared entry moduli."""
    return float(np.linalg.norm(np.asarray(a).ravel()))


def is_f_diagonal(a: np.ndarray, tol: float = 0.0) -> bool:
    """True iff every frontal slice has off-diagonal magnitude <= tol."""
    a = as_tensor(a)
    if a.ndim < 2:
        raise ValueError("f-diagonality requires order >= 2")
    n1, n2 = a.shape[:2]
    flat = a.reshape((n1, n2, -1), order="F")
    off = flat[~np.eye(n1, n2, dtype=bool)]
    return bool(off.size == 0 or np.max(np.abs(off)) <= tol)
