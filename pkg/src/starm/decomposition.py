"""The t-SVDM: per-slice SVDs in the transform domain, truncation, and the
truncation-error identity.

Factors are stored in the spatial domain. Under a complex transform domain
(the DFT) they are legitimately complex-valued; every invariant (orthogonality,
f-diagonality, reconstruction, tube ordering) holds in complex arithmetic and
products of the factors recombine to the original real tensor.
"""

from __future__ import annotations

import concurrent.futures
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import core, transforms as tfm
from .products import facewise_product
from .transforms import TransformSet


@dataclass
class TSVDMFactors:
    """U *M S *M V^T decomposition plus the transform set that produced it."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray
    transforms: TransformSet

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.u.shape[0], self.v.shape[0]) + self.s.shape[2:]


def tsvdm(a: np.ndarray, transforms: TransformSet, workers: int = 1) -> TSVDMFactors:
    """Decompose `a` into star-M orthogonal U, V and f-diagonal S.

    `workers` sets how many threads share the independent per-slice SVDs;
    the result is identical for any worker count.
    """
    a = core.as_tensor(a)
    if a.ndim < 2:
        raise ValueError("t-SVDM requires order >= 2")
    transforms.validate(a.shape)
    n1, n2 = a.shape[:2]
    trailing = a.shape[2:]

    ahat = transforms.forward(a)
    mats = np.moveaxis(ahat.reshape((n1, n2, -1), order="F"), -1, 0)
    uhat, sing, vhhat = _slice_svds(mats, workers)

    r = min(n1, n2)
    shat = np.zeros((mats.shape[0], n1, n2), dtype=sing.dtype)
    shat[:, np.arange(r), np.arange(r)] = sing
    vhat = np.conj(np.swapaxes(vhhat, -2, -1))

    u = _drop_tiny_imag(transforms.inverse(_unstack(uhat, (n1, n1) + trailing)))
    s = _drop_tiny_imag(transforms.inverse(_unstack(shat, (n1, n2) + trailing)))
    v = _drop_tiny_imag(transforms.inverse(_unstack(vhat, (n2, n2) + trailing)))
    return TSVDMFactors(u, s, v, transforms)


def _slice_svds(mats: np.ndarray, workers: int):
    if workers <= 1 or mats.shape[0] == 1:
        return np.linalg.svd(mats, full_matrices=True)
    chunks = [c for c in np.array_split(np.arange(mats.shape[0]), workers) if c.size]
    with concurrent.futures.ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(lambda idx: np.linalg.svd(mats[idx], full_matrices=True), chunks))
    return tuple(np.concatenate([p[i] for p in parts], axis=0) for i in range(3))


def _unstack(mats: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """(K, a, b) slice stack back to an (a, b, n3, ..., np) tensor."""
    return np.moveaxis(mats, 0, -1).reshape(shape, order="F")


def _drop_tiny_imag(x: np.ndarray) -> np.ndarray:
    if not np.iscomplexobj(x):
        return x
    scale = max(1.0, float(np.max(np.abs(x.real)))) if x.size else 1.0
    if x.size and float(np.max(np.abs(x.imag))) <= 1e-10 * scale:
        return np.ascontiguousarray(x.real)
    return x


def singular_tube_norms(factors: TSVDMFactors, domain: str = "spatial") -> np.ndarray:
    """Frobenius norms of the (i, i) tubes of S, leading tube first.

    domain="spatial" measures the stored S; domain="transform" measures in
    the transform domain (the two differ by the factor c per tube for
    orthogonal-multiple transforms).
    """
    s = factors.s
    if domain == "transform":
        s = factors.transforms.forward(s)
    elif domain != "spatial":
        raise ValueError(f"unknown domain {domain!r}")
    n1, n2 = s.shape[:2]
    r = min(n1, n2)
    flat = s.reshape((n1, n2, -1), order="F")
    tubes = flat[np.arange(r), np.arange(r), :]
    return np.linalg.norm(tubes, axis=1)


def t_rank(factors: TSVDMFactors, tol: float = 1e-10) -> int:
    """Number of tubes with norm above tol relative to the leading tube."""
    norms = singular_tube_norms(factors)
    if norms.size == 0 or norms[0] <= 0.0:
        return 0
    return int(np.count_nonzero(norms > tol * norms[0]))


def truncate(factors: TSVDMFactors, k: int) -> TSVDMFactors:
    """Keep the first k lateral slices of U and V and the leading k x k tube block of S."""
    r = min(factors.s.shape[0], factors.s.shape[1])
    if not 1 <= k <= r:
        raise ValueError(f"truncation rank must be in [1, {r}], got {k}")
    return TSVDMFactors(
        factors.u[:, :k].copy(), factors.s[:k, :k].copy(), factors.v[:, :k].copy(),
        factors.transforms,
    )


def reconstruct(factors: TSVDMFactors) -> np.ndarray:
    """U *M S *M V^T, composed in a single pass through the transform domain."""
    t = factors.transforms
    uhat, shat, vhat = t.forward(factors.u), t.forward(factors.s), t.forward(factors.v)
    chat = facewise_product(facewise_product(uhat, shat), np.conj(np.swapaxes(vhat, 0, 1)))
    return _drop_tiny_imag(t.inverse(chat))


def truncation_error(factors: TSVDMFactors, k: int) -> float:
    """Frobenius error of the t-rank-k truncation via the singular-tube tail.

    Requires an orthogonal-multiple transform set (the identity does not hold
    otherwise); computed as sqrt(sum of tail transform-domain tube norms
    squared / c^2), which equals the directly measured error.
    """
    if not factors.transforms.orthogonal_multiple:
        raise ValueError(
            "truncation error via singular tubes requires orthogonal-multiple transforms"
        )
    r = min(factors.s.shape[0], factors.s.shape[1])
    if not 1 <= k <= r:
        raise ValueError(f"truncation rank must be in [1, {r}], got {k}")
    hat_norms = singular_tube_norms(factors, domain="transform")
    c = factors.transforms.norm_scale
    return float(np.sqrt(np.sum(hat_norms[k:] ** 2) / c**2))


# Factor serialization: three tensor files plus a JSON header naming the
# transform per mode. Kinds that are reconstructible from parameters are
# stored as parameters; the rest embed their matrix as another tensor file.

_PARAMETRIC_KINDS = {"dft", "dct", "haar", "identity", "banded"}


def save_factors(factors: TSVDMFactors, directory, prefix: str = "factors") -> dict:
    from . import data

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, tensor in (("u", factors.u), ("s", factors.s), ("v", factors.v)):
        paths[name] = directory / f"{prefix}_{name}.tnsr"
        data.write_tnsr(paths[name], tensor)

    specs = []
    for i, t in enumerate(factors.transforms.transforms):
        mode = i + 3
        spec = t.spec(mode)
        reconstructible = t.kind in _PARAMETRIC_KINDS or (
            t.kind == "random_orthogonal" and t.params.get("seed") is not None
        )
        if not reconstructible:
            mat_path = directory / f"{prefix}_m{mode}.tnsr"
            data.write_tnsr(mat_path, t.matrix)
            spec["matrix_file"] = mat_path.name
        specs.append(spec)
    header = directory / f"{prefix}_transform.json"
    header.write_text(json.dumps({"version": 1, "transforms": specs}, indent=2))
    paths["header"] = header
    return paths


def load_factors(directory, prefix: str = "factors") -> TSVDMFactors:
    from . import data

    directory = Path(directory)
    header = json.loads((directory / f"{prefix}_transform.json").read_text())
    if header.get("version") != 1:
        raise ValueError(f"unsupported factor header version {header.get('version')!r}")
    mode_transforms = []
    for spec in header["transforms"]:
        mode_transforms.append(_transform_from_spec(spec, directory))
    u = data.read_tnsr(directory / f"{prefix}_u.tnsr")
    s = data.read_tnsr(directory / f"{prefix}_s.tnsr")
    v = data.read_tnsr(directory / f"{prefix}_v.tnsr")
    return TSVDMFactors(u, s, v, TransformSet(mode_transforms))


def _transform_from_spec(spec: dict, directory: Path) -> tfm.ModeTransform:
    from . import data

    kind = spec["kind"]
    n = int(spec["size"])
    if "matrix_file" in spec:
        matrix = data.read_tnsr(directory / spec["matrix_file"])
        return tfm.explicit_transform(matrix, kind=kind)
    if kind == "dft":
        return tfm.build_dft(n)
    if kind == "dct":
        return tfm.build_dct(n)
    if kind == "haar":
        return tfm.build_haar(n)
    if kind == "identity":
        return tfm.identity_transform(n)
    if kind == "banded":
        return tfm.build_banded(n, int(spec["bandwidth"]))
    if kind == "random_orthogonal":
        return tfm.build_random_orthogonal(n, int(spec["seed"]))
    raise ValueError(f"cannot rebuild transform of kind {kind!r}")
