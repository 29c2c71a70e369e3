"""The star-M tensor-tensor algebra: facewise and star-M products, transpose,
identity, orthogonality, and t-linear combinations.

All products are computed by moving the operands into the transform domain,
multiplying frontal slices, and moving back. The transpose conjugates the
transform-domain slices, which is what keeps Q^T * Q = I meaningful when a
transform (the DFT) makes the domain complex.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import core
from .transforms import TransformSet


def facewise_product(ahat: np.ndarray, bhat: np.ndarray) -> np.ndarray:
    """Multiply corresponding frontal slices: C(:,:,i...) = A(:,:,i...) @ B(:,:,i...)."""
    ahat = np.asarray(ahat)
    bhat = np.asarray(bhat)
    if ahat.ndim != bhat.ndim or ahat.ndim < 2:
        raise ValueError(f"facewise product needs equal-order tensors, got orders {ahat.ndim} and {bhat.ndim}")
    if ahat.shape[1] != bhat.shape[0]:
        raise ValueError(f"inner dimensions do not match: {ahat.shape[1]} vs {bhat.shape[0]}")
    if ahat.shape[2:] != bhat.shape[2:]:
        raise ValueError(f"trailing dimensions differ: {ahat.shape[2:]} vs {bhat.shape[2:]}")
    return np.einsum("ij...,jk...->ik...", ahat, bhat)


def starm_product(a: np.ndarray, b: np.ndarray, transforms: TransformSet) -> np.ndarray:
    """C = A *M B: forward transform, facewise multiply, inverse transform."""
    a = core.as_tensor(a)
    b = core.as_tensor(b)
    to_real = not (np.iscomplexobj(a) or np.iscomplexobj(b))
    chat = facewise_product(transforms.forward(a), transforms.forward(b))
    return transforms.inverse(chat, to_real=to_real)


def starm_transpose(a: np.ndarray, transforms: TransformSet) -> np.ndarray:
    """Conjugate-transpose every transform-domain frontal slice."""
    a = core.as_tensor(a)
    ahat = transforms.forward(a)
    that = np.conj(np.swapaxes(ahat, 0, 1))
    return transforms.inverse(that, to_real=not np.iscomplexobj(a))


def starm_identity(n: int, trailing_shape, transforms: TransformSet) -> np.ndarray:
    """The tensor whose transform-domain frontal slices are all the n x n identity."""
    trailing_shape = tuple(int(d) for d in trailing_shape)
    if trailing_shape != transforms.trailing_shape:
        raise ValueError(
            f"trailing shape {trailing_shape} does not match transform set {transforms.trailing_shape}"
        )
    eye = np.eye(int(n))
    ihat = np.ascontiguousarray(np.broadcast_to(eye.reshape((n, n) + (1,) * len(trailing_shape)),
                                                (n, n) + trailing_shape))
    return transforms.inverse(ihat, to_real=True)


def identity_tube(trailing_shape, transforms: TransformSet) -> np.ndarray:
    """The multiplicative unit tube: its transform is all ones."""
    return starm_identity(1, trailing_shape, transforms)


def is_starm_orthogonal(q: np.ndarray, transforms: TransformSet, tol: float = 1e-8) -> bool:
    """True iff Q^T *M Q and Q *M Q^T both equal the star-M identity within tol.

    The comparison is relative to the Frobenius norm of the identity tensor.
    """
    q = core.as_tensor(q)
    if q.ndim < 2 or q.shape[0] != q.shape[1]:
        raise ValueError(f"star-M orthogonality is defined for square tensors, got {q.shape}")
    ident = starm_identity(q.shape[0], q.shape[2:], transforms)
    qt = starm_transpose(q, transforms)
    ref = core.frobenius_norm(ident)
    left = core.frobenius_norm(starm_product(qt, q, transforms) - ident)
    right = core.frobenius_norm(starm_product(q, qt, transforms) - ident)
    return bool(left <= tol * ref and right <= tol * ref)


def t_linear_combination(basis: Sequence[np.ndarray], coeffs: Sequence[np.ndarray],
                         transforms: TransformSet) -> np.ndarray:
    """Sum of basis lateral slices each multiplied (star-M) by a coefficient tube."""
    if len(basis) != len(coeffs):
        raise ValueError(f"{len(basis)} basis slices but {len(coeffs)} coefficient tubes")
    if not basis:
        raise ValueError("empty t-linear combination")
    out = None
    for slice_, tube_ in zip(basis, coeffs):
        slice_ = core.as_tensor(slice_)
        tube_ = core.as_tensor(tube_)
        if slice_.shape[1] != 1 or tube_.shape[:2] != (1, 1):
            raise ValueError(
                f"expected (n1,1,...) slices and (1,1,...) tubes, got {slice_.shape} and {tube_.shape}"
            )
        term = starm_product(slice_, tube_, transforms)
        out = term if out is None else out + term
    return out
