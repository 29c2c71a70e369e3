"""Projection-based classification with per-class truncated t-SVDM bases.

One basis per class is built from that class's training tensor (trials as
lateral slices). A test slice is orthogonally projected onto each class span
in the transform domain and assigned to the class with the smallest
Frobenius residual; exact ties go to the lowest class id. The vectorized
matrix-SVD pipeline is provided as the like-for-like baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import core
from .decomposition import TSVDMFactors, tsvdm, truncate
from .transforms import TransformSet


@dataclass
class ClassBasis:
    """First k lateral slices of a class's U factor, ready for projection."""

    class_id: int
    u_k: np.ndarray
    k: int
    transforms: TransformSet
    _u_hat: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def u_hat(self) -> np.ndarray:
        if self._u_hat is None:
            self._u_hat = self.transforms.forward(self.u_k)
        return self._u_hat

    @classmethod
    def from_factors(cls, factors: TSVDMFactors, k: int, class_id: int) -> "ClassBasis":
        if not 1 <= k <= factors.u.shape[1]:
            raise ValueError(f"truncation k={k} out of range [1, {factors.u.shape[1]}]")
        return cls(class_id, factors.u[:, :k].copy(), k, factors.transforms)


@dataclass
class ClassificationResult:
    predicted: int
    class_ids: list[int]
    residuals: np.ndarray


@dataclass
class DatasetSplit:
    """Per-class training tensors plus held-out test slices with true labels."""

    train: dict[int, np.ndarray]
    test: np.ndarray
    test_labels: np.ndarray
    seed: int


@dataclass
class EvalResult:
    accuracy: float
    confusion: np.ndarray
    class_ids: list[int]


def build_local_bases(class_tensors: Sequence[np.ndarray], ks, transforms: TransformSet,
                      class_ids: Sequence[int] | None = None, workers: int = 1) -> list[ClassBasis]:
    """t-SVDM each class tensor and keep its first k lateral basis slices.

    `ks` is a single truncation or one per class. Non-trial dimensions must
    agree across classes; each k is limited by min(n1, trial count).
    """
    tensors = [core.as_tensor(t) for t in class_tensors]
    if not tensors:
        raise ValueError("no class tensors given")
    if class_ids is None:
        class_ids = list(range(len(tensors)))
    ref = tensors[0].shape[:1] + tensors[0].shape[2:]
    for t in tensors[1:]:
        if t.shape[:1] + t.shape[2:] != ref:
            raise ValueError("class tensors disagree in their non-trial dimensions")
    if np.isscalar(ks):
        ks = [int(ks)] * len(tensors)
    if len(ks) != len(tensors):
        raise ValueError(f"{len(ks)} truncations for {len(tensors)} classes")
    bases = []
    for cid, tensor, k in zip(class_ids, tensors, ks):
        limit = min(tensor.shape[0], tensor.shape[1])
        if not 1 <= k <= limit:
            raise ValueError(f"class {cid}: k={k} out of range [1, {limit}]")
        factors = tsvdm(tensor, transforms, workers=workers)
        bases.append(ClassBasis.from_factors(factors, k, cid))
    return bases


def project(t_slice: np.ndarray, basis: ClassBasis) -> np.ndarray:
    """Orthogonal projection U_k *M U_k^T *M T of a lateral slice onto the class span."""
    t = core.as_tensor(t_slice)
    if t.ndim != basis.u_k.ndim or t.shape[1] != 1 or t.shape[0] != basis.u_k.shape[0] \
            or t.shape[2:] != basis.u_k.shape[2:]:
        raise ValueError(f"test slice shape {t.shape} does not match basis shape {basis.u_k.shape}")
    that = basis.transforms.forward(t)
    uhat = basis.u_hat
    coeff = np.einsum("ji...,jk...->ik...", np.conj(uhat), that)
    phat = np.einsum("ij...,jk...->ik...", uhat, coeff)
    return basis.transforms.inverse(phat, to_real=not np.iscomplexobj(t))


def classify(t_slice: np.ndarray, bases: Sequence[ClassBasis]) -> ClassificationResult:
    """Assign the class whose projection is closest in Frobenius norm."""
    if not bases:
        raise ValueError("no class bases given")
    t = core.as_tensor(t_slice)
    residuals = np.array([core.frobenius_norm(t - project(t, b)) for b in bases])
    class_ids = [b.class_id for b in bases]
    best = residuals.min()
    predicted = min(cid for cid, r in zip(class_ids, residuals) if r == best)
    return ClassificationResult(predicted, class_ids, residuals)


def evaluate(split: DatasetSplit, bases: Sequence[ClassBasis]) -> EvalResult:
    """Test accuracy (correct / total) plus the confusion matrix over class ids."""
    return _evaluate(split, lambda t: classify(t, bases).predicted, [b.class_id for b in bases])


def _evaluate(split: DatasetSplit, predict, class_ids: Sequence[int]) -> EvalResult:
    ids = list(class_ids)
    pos = {cid: i for i, cid in enumerate(ids)}
    labels = np.asarray(split.test_labels)
    if labels.size == 0:
        raise ValueError("empty test set")
    missing = set(int(l) for l in labels) - set(ids)
    if missing:
        raise ValueError(f"test labels {sorted(missing)} have no class basis")
    confusion = np.zeros((len(ids), len(ids)), dtype=int)
    for j in range(split.test.shape[1]):
        predicted = predict(core.lateral_slice(split.test, j))
        confusion[pos[int(labels[j])], pos[predicted]] += 1
    accuracy = float(np.trace(confusion)) / float(labels.size)
    return EvalResult(accuracy, confusion, ids)


def matrix_baseline(split: DatasetSplit, k: int) -> EvalResult:
    """The matrix analog: vectorize trials, per-class SVD, rank-k projection, argmin residual."""
    svds = _matrix_class_svds(split)
    return _matrix_evaluate(split, svds, k)


def matrix_baseline_sweep(split: DatasetSplit, ks: Sequence[int]) -> dict[int, EvalResult]:
    """matrix_baseline over several k, reusing the per-class SVDs."""
    svds = _matrix_class_svds(split)
    return {int(k): _matrix_evaluate(split, svds, int(k)) for k in ks}


def _matrix_class_svds(split: DatasetSplit) -> dict[int, np.ndarray]:
    out = {}
    for cid in sorted(split.train):
        cols = core.mode_k_unfold(split.train[cid], 2).T
        out[cid] = np.linalg.svd(cols, full_matrices=False)[0]
    return out


def _matrix_evaluate(split: DatasetSplit, svds: dict[int, np.ndarray], k: int) -> EvalResult:
    ids = sorted(svds)
    limit = min(u.shape[1] for u in svds.values())
    if not 1 <= k <= limit:
        raise ValueError(f"matrix rank k={k} out of range [1, {limit}]")
    test_cols = core.mode_k_unfold(split.test, 2).T
    residuals = np.empty((len(ids), test_cols.shape[1]))
    for i, cid in enumerate(ids):
        u_k = svds[cid][:, :k]
        residuals[i] = np.linalg.norm(test_cols - u_k @ (u_k.conj().T @ test_cols), axis=0)
    best = residuals.min(axis=0)
    predictions = [min(ids[i] for i in range(len(ids)) if residuals[i, j] == best[j])
                   for j in range(test_cols.shape[1])]
    pos = {cid: i for i, cid in enumerate(ids)}
    confusion = np.zeros((len(ids), len(ids)), dtype=int)
    for true, pred in zip(split.test_labels, predictions):
        confusion[pos[int(true)], pos[pred]] += 1
    accuracy = float(np.trace(confusion)) / float(len(predictions))
    return EvalResult(accuracy, confusion, ids)


def tensor_sweep(split: DatasetSplit, transforms: TransformSet, ks: Sequence[int],
                 workers: int = 1) -> dict[int, EvalResult]:
    """evaluate() over several k, decomposing each class once.

    Slicing the transform-domain U of the full decomposition equals
    transforming the sliced U, so results match per-k build_local_bases.
    """
    ids = sorted(split.train)
    factors = {cid: tsvdm(split.train[cid], transforms, workers=workers) for cid in ids}
    u_hats = {cid: transforms.forward(f.u) for cid, f in factors.items()}
    out = {}
    for k in ks:
        k = int(k)
        bases = []
        for cid in ids:
            basis = ClassBasis.from_factors(factors[cid], k, cid)
            basis._u_hat = u_hats[cid][:, :k]
            bases.append(basis)
        out[k] = evaluate(split, bases)
    return out


def result_row(transform_name: str, k: int, split: DatasetSplit, result: EvalResult) -> str:
    """One `transform,k,class_counts,accuracy,seed` CSV row (counts as id:n pairs joined by ;)."""
    counts = ";".join(f"{cid}:{split.train[cid].shape[1]}" for cid in sorted(split.train))
    return f"{transform_name},{k},{counts},{result.accuracy:.6f},{split.seed}"
