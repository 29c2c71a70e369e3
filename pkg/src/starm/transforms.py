"""Per-mode invertible transforms and the transform sets that define star-M products.

A ModeTransform is one invertible n x n matrix applied along a single tensor
mode; a TransformSet bundles the transforms for modes 3..p. The DFT and DCT
are realized through their fast functional forms and agree with the explicit
matrices they stand for; every other kind carries an explicit matrix.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.fft
import scipy.linalg

from . import core

# Relative checks for "multiple of an orthogonal matrix" and for discarding
# numerically-zero imaginary parts on the way back from the transform domain.
ORTHO_MULTIPLE_TOL = 1e-10
IMAG_RESIDUE_TOL = 1e-10


class ModeTransform:
    """One invertible transform along a single mode.

    `c` is the orthogonal-multiple scalar: M = c * W with W orthogonal
    (c = 1 for orthonormal kinds, sqrt(n) for the unnormalized DFT, None
    when M is not a multiple of an orthogonal matrix).
    """

    def __init__(self, kind: str, n: int, c: float | None, matrix: np.ndarray | None = None,
                 inverse_matrix: np.ndarray | None = None, params: dict | None = None):
        self.kind = kind
        self.n = int(n)
        self.c = c
        self.params = dict(params or {})
        self._matrix = matrix
        self._inverse_matrix = inverse_matrix

    def __repr__(self):
        extra = "".join(f", {k}={v}" for k, v in self.params.items())
        return f"ModeTransform({self.kind!r}, n={self.n}{extra})"

    @property
    def matrix(self) -> np.ndarray:
        """Explicit matrix form (materialized on demand for functional kinds)."""
        if self._matrix is None:
            self._matrix = self.apply(np.eye(self.n), axis=0)
        return self._matrix

    @property
    def inverse_matrix(self) -> np.ndarray:
        if self._inverse_matrix is None:
            self._inverse_matrix = self.apply_inverse(np.eye(self.n), axis=0)
        return self._inverse_matrix

    def apply(self, a: np.ndarray, axis: int) -> np.ndarray:
        if a.shape[axis] != self.n:
            raise ValueError(f"transform of size {self.n} does not fit axis of size {a.shape[axis]}")
        if self.kind == "dft":
            return np.fft.fft(a, axis=axis)
        if self.kind == "dct":
            return scipy.fft.dct(a, type=2, norm="ortho", axis=axis)
        return core.mode_k_product(a, self._matrix, axis + 1)

    def apply_inverse(self, a: np.ndarray, axis: int) -> np.ndarray:
        if a.shape[axis] != self.n:
            raise ValueError(f"transform of size {self.n} does not fit axis of size {a.shape[axis]}")
        if self.kind == "dft":
            return np.fft.ifft(a, axis=axis)
        if self.kind == "dct":
            return scipy.fft.idct(a, type=2, norm="ortho", axis=axis)
        return core.mode_k_product(a, self._inverse_matrix, axis + 1)

    def spec(self, mode: int) -> dict:
        """JSON-serializable description, `{"mode": 3, "kind": "dft"}` style."""
        out = {"mode": mode, "kind": self.kind, "size": self.n}
        out.update(self.params)
        return out


def _explicit(kind: str, matrix: np.ndarray, params: dict | None = None,
              inverse: np.ndarray | None = None, c="detect") -> ModeTransform:
    matrix = np.asarray(matrix, dtype=complex if np.iscomplexobj(matrix) else float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"mode transforms must be square, got shape {matrix.shape}")
    n = matrix.shape[0]
    gram = matrix.conj().T @ matrix
    if c == "detect":
        c2 = float(np.trace(gram).real) / n
        is_mult = c2 > 0 and np.linalg.norm(gram - c2 * np.eye(n)) <= ORTHO_MULTIPLE_TOL * c2
        c = float(np.sqrt(c2)) if is_mult else None
    if inverse is None:
        if c is not None:
            inverse = matrix.conj().T / (c * c)
        else:
            cond = np.linalg.cond(matrix)
            if not np.isfinite(cond) or cond > 1e12:
                raise ValueError(f"{kind} matrix is numerically singular (cond={cond:.3g})")
            inverse = np.linalg.inv(matrix)
    return ModeTransform(kind, n, c, matrix=matrix, inverse_matrix=inverse, params=params)


def identity_transform(n: int) -> ModeTransform:
    """Identity matrix transform; the star-M product degenerates to the facewise product."""
    eye = np.eye(int(n))
    return ModeTransform("identity", n, 1.0, matrix=eye, inverse_matrix=eye)


def build_dft(n: int) -> ModeTransform:
    """Unnormalized DFT (F[j,l] = exp(-2*pi*i*j*l/n)); inverse is F^H / n, c = sqrt(n)."""
    if n < 1:
        raise ValueError("transform size must be >= 1")
    return ModeTransform("dft", n, float(np.sqrt(n)))


def build_dct(n: int) -> ModeTransform:
    """Orthonormal DCT-II; c = 1."""
    if n < 1:
        raise ValueError("transform size must be >= 1")
    return ModeTransform("dct", n, 1.0)


def build_haar(n: int) -> ModeTransform:
    """Normalized (orthogonal) Haar matrix; n must be a power of two."""
    if n < 1 or (n & (n - 1)) != 0:
        raise ValueError(f"Haar transform requires a power-of-two size, got {n}")
    h = np.array([[1.0]])
    while h.shape[0] < n:
        m = h.shape[0]
        h = np.vstack([np.kron(h, [1.0, 1.0]), np.kron(np.eye(m), [1.0, -1.0])]) / np.sqrt(2.0)
    return _explicit("haar", h, c=1.0)


def build_banded(n: int, bandwidth: int) -> ModeTransform:
    """Lower-triangular causal moving average: M[i,j] = 1/min(i+1,b) on the band."""
    if not 1 <= bandwidth <= n:
        raise ValueError(f"bandwidth must be in [1, {n}], got {bandwidth}")
    m = np.zeros((n, n))
    for i in range(n):
        w = min(i + 1, bandwidth)
        m[i, max(0, i - bandwidth + 1) : i + 1] = 1.0 / w
    return _explicit("banded", m, params={"bandwidth": int(bandwidth)}, c=None)


def build_random_orthogonal(n: int, seed) -> ModeTransform:
    """QR orthogonal factor of an n x n standard Gaussian matrix, sign-fixed so diag(R) >= 0."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.where(np.diag(r) >= 0, 1.0, -1.0)
    seed_param = int(seed) if np.isscalar(seed) else None
    return _explicit("random_orthogonal", q, params={"seed": seed_param}, c=1.0)


def build_data_dependent(a: np.ndarray, mode: int) -> ModeTransform:
    """M = U^T from the SVD of the mode-k unfolding of `a`."""
    unfold = core.mode_k_unfold(a, mode)
    if not np.any(unfold):
        raise ValueError(f"mode-{mode} unfolding is identically zero; no data-dependent transform")
    u = _full_left_singular_basis(unfold)
    return _explicit("data_dependent", u.conj().T, c=1.0)


def build_roi_selection(roi: np.ndarray, roi_label: int, mode: int) -> np.ndarray:
    """Selection matrix P (m_k x q) picking the unfolding columns that contain `roi_label`."""
    cols = roi_column_indices(roi, roi_label, mode)
    m_k = core.mode_k_unfold(np.asarray(roi), mode).shape[1]
    p = np.zeros((m_k, cols.size))
    p[cols, np.arange(cols.size)] = 1.0
    return p


def roi_column_indices(roi: np.ndarray, roi_label: int, mode: int) -> np.ndarray:
    """Indices of mode-k unfolding columns whose fibers cross the labelled region."""
    unfold = core.mode_k_unfold(np.asarray(roi), mode)
    cols = np.flatnonzero(np.any(unfold == roi_label, axis=0))
    if cols.size == 0:
        raise ValueError(f"ROI label {roi_label} is absent (q=0 selected columns)")
    return cols


def build_roi_dependent(a: np.ndarray, roi: np.ndarray, roi_label: int, mode: int) -> ModeTransform:
    """M = U^T from the SVD of the ROI-restricted mode-k unfolding.

    Equivalent to build_data_dependent on A_(k) @ P with P from
    build_roi_selection; the restriction is done by column slicing. When the
    restricted unfolding has fewer columns than rows, U is completed to a
    full orthogonal basis.
    """
    a = core.as_tensor(a)
    roi = np.asarray(roi)
    if roi.shape != a.shape:
        raise ValueError(f"ROI tensor shape {roi.shape} does not match data shape {a.shape}")
    cols = roi_column_indices(roi, roi_label, mode)
    restricted = core.mode_k_unfold(a, mode)[:, cols]
    if not np.any(restricted):
        raise ValueError(f"ROI-restricted mode-{mode} unfolding is identically zero")
    u = _full_left_singular_basis(restricted)
    return _explicit("roi_dependent", u.conj().T, params={"roi_label": int(roi_label)}, c=1.0)


def _full_left_singular_basis(mat: np.ndarray) -> np.ndarray:
    """Square U of the SVD, completing the thin factor when columns are scarce."""
    n = mat.shape[0]
    u = np.linalg.svd(mat, full_matrices=False)[0]
    if u.shape[1] < n:
        complement = scipy.linalg.null_space(u.conj().T)
        u = np.column_stack([u, complement[:, : n - u.shape[1]]])
    return u


def explicit_transform(matrix: np.ndarray, kind: str = "explicit_matrix") -> ModeTransform:
    """Wrap an explicit invertible matrix; orthogonal-multiple status is auto-detected."""
    return _explicit(kind, matrix)


class TransformSet:
    """The transforms for modes 3..p of an order-p tensor (empty for p = 2).

    Immutable once built; forward/inverse apply the mode products of
    Algorithm-style star-M computation. `norm_scale` is c = prod(c_k) when
    every mode is a multiple of an orthogonal matrix, else None.
    """

    def __init__(self, transforms: Sequence[ModeTransform]):
        self.transforms = tuple(transforms)

    def __repr__(self):
        return f"TransformSet({list(self.transforms)!r})"

    def __len__(self):
        return len(self.transforms)

    @property
    def orthogonal_multiple(self) -> bool:
        return all(t.c is not None for t in self.transforms)

    @property
    def norm_scale(self) -> float | None:
        if not self.orthogonal_multiple:
            return None
        return float(np.prod([t.c for t in self.transforms])) if self.transforms else 1.0

    @property
    def trailing_shape(self) -> tuple[int, ...]:
        return tuple(t.n for t in self.transforms)

    def validate(self, shape) -> None:
        shape = tuple(shape)
        if len(shape) < 2:
            raise ValueError("star-M operations need tensors of order >= 2")
        if tuple(shape[2:]) != self.trailing_shape:
            raise ValueError(
                f"transform set for trailing dims {self.trailing_shape} does not match "
                f"tensor trailing dims {tuple(shape[2:])}"
            )

    def forward(self, a: np.ndarray) -> np.ndarray:
        """Move into the transform domain: successive mode-k products, k = 3..p."""
        a = core.as_tensor(a)
        self.validate(a.shape)
        for i, t in enumerate(self.transforms):
            a = t.apply(a, axis=i + 2)
        return a

    def inverse(self, ahat: np.ndarray, to_real: bool = False) -> np.ndarray:
        """Leave the transform domain: successive inverse mode-k products.

        With to_real=True the result must be real up to roundoff; imaginary
        residue within tolerance is discarded, anything larger raises.
        """
        ahat = np.asarray(ahat)
        self.validate(ahat.shape)
        for i, t in enumerate(self.transforms):
            ahat = t.apply_inverse(ahat, axis=i + 2)
        if to_real and np.iscomplexobj(ahat):
            scale = max(1.0, float(np.max(np.abs(ahat.real))) if ahat.size else 1.0)
            residue = float(np.max(np.abs(ahat.imag))) if ahat.size else 0.0
            if residue > IMAG_RESIDUE_TOL * scale:
                raise ValueError(
                    f"inverse transform of a supposedly real tensor left imaginary residue {residue:.3g}"
                )
            return np.ascontiguousarray(ahat.real)
        return ahat

    def specs(self) -> list[dict]:
        return [t.spec(mode=i + 3) for i, t in enumerate(self.transforms)]

    @classmethod
    def identity(cls, trailing_shape) -> "TransformSet":
        return cls([identity_transform(n) for n in trailing_shape])

    @classmethod
    def uniform(cls, trailing_shape, kind: str, *, seed: int = 0, bandwidth: int = 2) -> "TransformSet":
        """Same transform kind on every trailing mode (random kinds get per-mode derived seeds)."""
        out = []
        for i, n in enumerate(trailing_shape):
            out.append(_build_kind(kind, n, mode=i + 3, seed=seed, bandwidth=bandwidth))
        return cls(out)

    @classmethod
    def data_dependent(cls, a: np.ndarray) -> "TransformSet":
        a = core.as_tensor(a)
        return cls([build_data_dependent(a, mode) for mode in range(3, a.ndim + 1)])

    @classmethod
    def roi_dependent(cls, a: np.ndarray, roi: np.ndarray, roi_label: int) -> "TransformSet":
        a = core.as_tensor(a)
        return cls([build_roi_dependent(a, roi, roi_label, mode) for mode in range(3, a.ndim + 1)])


def _build_kind(kind: str, n: int, *, mode: int, seed: int, bandwidth: int) -> ModeTransform:
    kind = kind.lower()
    if kind == "dft":
        return build_dft(n)
    if kind == "dct":
        return build_dct(n)
    if kind == "haar":
        return build_haar(n)
    if kind == "banded":
        return build_banded(n, bandwidth)
    if kind in ("random", "random_orthogonal"):
        return build_random_orthogonal(n, np.random.SeedSequence(entropy=seed, spawn_key=(mode,)))
    if kind in ("identity", "facewise"):
        return identity_transform(n)
    raise ValueError(f"unknown transform kind {kind!r}")
