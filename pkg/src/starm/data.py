"""Dataset plumbing: the TNSR binary tensor format, IDX image files, label
CSVs, class-tensor assembly, train/test splitting, and synthetic generators.

TNSR v1 layout, little-endian throughout:

    bytes 0-3   magic "TNSR"
    byte  4     version (1)
    byte  5     scalar code: 0 = float64, 1 = complex128 (re/im pairs)
    byte  6     order p
    byte  7     padding (0)
    8 .. 8+8p   p u64 dimensions
    rest        buffer in column-major order

Sample tensors put trials on dimension 2, e.g. (x, trials, y, z, time), so
every trial is one lateral slice.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import core
from .classification import DatasetSplit

TNSR_MAGIC = b"TNSR"
_SCALAR_CODES = {0: np.dtype("<f8"), 1: np.dtype("<c16")}


def write_tnsr(path, a: np.ndarray) -> None:
    a = core.as_tensor(a)
    code = 1 if np.iscomplexobj(a) else 0
    header = TNSR_MAGIC + struct.pack("<BBBB", 1, code, a.ndim, 0)
    dims = struct.pack(f"<{a.ndim}Q", *a.shape)
    payload = np.asarray(a, dtype=_SCALAR_CODES[code]).tobytes(order="F")
    Path(path).write_bytes(header + dims + payload)


def read_tnsr(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 8 or raw[:4] != TNSR_MAGIC:
        raise ValueError(f"{path}: not a TNSR file (bad magic)")
    version, code, order, pad = struct.unpack("<BBBB", raw[4:8])
    if version != 1:
        raise ValueError(f"{path}: unsupported TNSR version {version}")
    if code not in _SCALAR_CODES:
        raise ValueError(f"{path}: unknown scalar code {code}")
    if order < 1:
        raise ValueError(f"{path}: tensor order must be >= 1")
    if len(raw) < 8 + 8 * order:
        raise ValueError(f"{path}: truncated TNSR header")
    dims = struct.unpack(f"<{order}Q", raw[8 : 8 + 8 * order])
    if any(d < 1 for d in dims):
        raise ValueError(f"{path}: empty dimensions {dims} are not allowed")
    count = math.prod(dims)
    if count > core.MAX_ELEMENTS:
        raise ValueError(f"{path}: element count {count} overflows the index type")
    dtype = _SCALAR_CODES[code]
    expected = 8 + 8 * order + count * dtype.itemsize
    if len(raw) != expected:
        raise ValueError(f"{path}: payload is {len(raw) - 8 - 8 * order} bytes, "
                         f"expected {count * dtype.itemsize}")
    buf = np.frombuffer(raw, dtype=dtype, offset=8 + 8 * order)
    return buf.reshape(dims, order="F").copy()


def write_labels_csv(path, labels) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial_index", "label"])
        for i, label in enumerate(labels):
            writer.writerow([i, int(label)])


def read_labels_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["trial_index", "label"]:
        raise ValueError(f"{path}: expected a 'trial_index,label' header")
    labels = np.empty(len(rows) - 1, dtype=int)
    for row in rows[1:]:
        idx, label = int(row[0]), int(row[1])
        if not 0 <= idx < labels.size:
            raise ValueError(f"{path}: trial index {idx} out of range")
        labels[idx] = label
    return labels


@dataclass
class LabeledDataset:
    """Samples with trials on dimension 2, one integer label per trial.

    `roi` is an optional per-voxel region-label tensor shaped like a single
    trial (singleton trial axis); labels are nonnegative integers stored as
    float64.
    """

    samples: np.ndarray
    labels: np.ndarray
    roi: np.ndarray | None = None

    def __post_init__(self):
        self.samples = core.as_tensor(self.samples)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.samples.ndim < 2:
            raise ValueError("sample tensor must have a trial dimension (order >= 2)")
        if self.labels.shape != (self.samples.shape[1],):
            raise ValueError(
                f"{self.labels.size} labels for {self.samples.shape[1]} trials"
            )
        if self.roi is not None:
            self.roi = core.as_tensor(self.roi)
            expected = (self.samples.shape[0], 1) + self.samples.shape[2:]
            if self.roi.shape != expected:
                raise ValueError(f"ROI tensor shape {self.roi.shape}, expected {expected}")
            if np.any(self.roi < 0) or np.any(self.roi != np.round(self.roi)):
                raise ValueError("ROI labels must be nonnegative integers")

    @property
    def trial_count(self) -> int:
        return self.samples.shape[1]


def tile_roi(roi: np.ndarray, n_trials: int) -> np.ndarray:
    """Repeat a single-trial ROI tensor along the trial axis to match a data tensor."""
    roi = core.as_tensor(roi)
    reps = (1, int(n_trials)) + (1,) * (roi.ndim - 2)
    return np.tile(roi, reps)


# IDX (big-endian) image/label files, the MNIST container format.

def write_idx_images(path, images: np.ndarray) -> None:
    """Write (count, rows, cols) images as an unsigned-byte IDX3 file."""
    images = np.asarray(images)
    if images.ndim != 3:
        raise ValueError(f"expected (count, rows, cols) images, got shape {images.shape}")
    if images.dtype != np.uint8:
        images = np.clip(np.round(images * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">BBBB", 0, 0, 0x08, 3))
        fh.write(struct.pack(">III", *images.shape))
        fh.write(images.tobytes(order="C"))


def write_idx_labels(path, labels) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">BBBB", 0, 0, 0x08, 1))
        fh.write(struct.pack(">I", labels.size))
        fh.write(labels.tobytes())


def _read_idx_array(path, expect_ndim: int) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[0] != 0 or raw[1] != 0:
        raise ValueError(f"{path}: malformed IDX header")
    dtype_code, ndim = raw[2], raw[3]
    if dtype_code != 0x08:
        raise ValueError(f"{path}: only unsigned-byte IDX data is supported, got code {dtype_code:#x}")
    if ndim != expect_ndim:
        raise ValueError(f"{path}: expected {expect_ndim} dimensions, header says {ndim}")
    if len(raw) < 4 + 4 * ndim:
        raise ValueError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{ndim}I", raw[4 : 4 + 4 * ndim])
    count = math.prod(dims)
    if len(raw) != 4 + 4 * ndim + count:
        raise ValueError(f"{path}: payload size mismatch for dimensions {dims}")
    return np.frombuffer(raw, dtype=np.uint8, offset=4 + 4 * ndim).reshape(dims)


def read_idx(image_path, label_path=None) -> LabeledDataset:
    """Read IDX images (and optionally labels) into an (x, trials, y) dataset.

    Pixels are scaled to [0, 1] and trials moved to dimension 2. Without a
    label file every trial gets label 0.
    """
    images = _read_idx_array(image_path, expect_ndim=3)
    samples = np.ascontiguousarray(np.transpose(images, (1, 0, 2))).astype(np.float64) / 255.0
    if label_path is not None:
        labels = _read_idx_array(label_path, expect_ndim=1).astype(int)
        if labels.size != images.shape[0]:
            raise ValueError(
                f"{label_path}: {labels.size} labels for {images.shape[0]} images"
            )
    else:
        labels = np.zeros(images.shape[0], dtype=int)
    return LabeledDataset(samples, labels)


def assemble_class_tensors(ds: LabeledDataset, classes) -> list[np.ndarray]:
    """One tensor per requested class, its trials as lateral slices."""
    out = []
    for label in classes:
        idx = np.flatnonzero(ds.labels == label)
        if idx.size == 0:
            raise ValueError(f"class {label} has no trials")
        out.append(ds.samples[:, idx].copy())
    return out


def split(ds: LabeledDataset, fraction: float, seed: int) -> DatasetSplit:
    """Stratified train/test split; train count per class = round(fraction * count)."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"split fraction must leave both sides nonempty, got {fraction}")
    rng = np.random.default_rng(seed)
    train: dict[int, np.ndarray] = {}
    test_idx: list[int] = []
    for label in np.unique(ds.labels):
        idx = np.flatnonzero(ds.labels == label)
        perm = rng.permutation(idx)
        n_train = int(round(fraction * idx.size))
        if n_train == 0 or n_train == idx.size:
            raise ValueError(f"class {label}: {fraction} split leaves an empty side "
                             f"({idx.size} trials)")
        train[int(label)] = ds.samples[:, np.sort(perm[:n_train])].copy()
        test_idx.extend(perm[n_train:].tolist())
    order = np.sort(np.asarray(test_idx, dtype=int))
    return DatasetSplit(train, ds.samples[:, order].copy(), ds.labels[order].copy(), int(seed))


def synth_planted(class_count: int, trials_per_class: int, sample_shape, t_ranks,
                  sigma: float, seed: int) -> LabeledDataset:
    """Generate classes as t-linear spans of planted bases plus Gaussian noise.

    Each class draws one orthonormal n1 x r matrix shared by all frontal
    slices; every sample slice then lies in that column space under any
    per-mode transform, so a t-rank-r basis represents the class exactly.
    Signal entries have unit RMS, making `sigma` the noise-to-signal scale.
    """
    dims = core.check_shape(sample_shape)
    if len(dims) < 2:
        raise ValueError("sample shape needs at least (n1, n3) dimensions")
    n1, trailing = dims[0], dims[1:]
    if np.isscalar(t_ranks):
        t_ranks = [int(t_ranks)] * class_count
    if len(t_ranks) != class_count:
        raise ValueError(f"{len(t_ranks)} ranks for {class_count} classes")
    if any(not 1 <= r <= n1 for r in t_ranks):
        raise ValueError(f"planted ranks must be in [1, {n1}], got {t_ranks}")

    rng = np.random.default_rng(seed)
    n_cols = math.prod(trailing)
    total = class_count * trials_per_class
    samples = np.empty((n1, total) + trailing)
    labels = np.repeat(np.arange(class_count), trials_per_class)
    for ci in range(class_count):
        r = int(t_ranks[ci])
        basis = _planted_basis(rng, n1, r)
        for t in range(trials_per_class):
            coeff = rng.standard_normal((r, n_cols))
            x = ((basis @ coeff) * np.sqrt(n1 / r)).reshape((n1,) + trailing, order="F")
            if sigma:
                x = x + sigma * rng.standard_normal(x.shape)
            samples[:, ci * trials_per_class + t] = x
    return LabeledDataset(samples, labels)


def synth_roi_planted(class_count: int, trials_per_class: int, sample_shape, t_rank: int,
                      sigma: float, seed: int, roi_regions: int = 4,
                      roi_signal_label: int = 1) -> LabeledDataset:
    """Planted classes whose signal lives in one ROI band with a separable trailing profile.

    The first axis is cut into `roi_regions` labelled bands. Inside the
    `roi_signal_label` band, every trial is (planted spatial basis @ coeffs)
    times one shared rank-1 profile across the trailing modes; outside it is
    pure noise. A transform fit to the signal band concentrates each class
    onto a single transform-domain slice, so ROI-dependent transforms from
    the planted band separate the classes where others do not.
    """
    dims = core.check_shape(sample_shape)
    if len(dims) < 2:
        raise ValueError("sample shape needs at least (n1, n3) dimensions")
    n1, trailing = dims[0], dims[1:]
    if not 1 <= t_rank <= n1:
        raise ValueError(f"planted rank must be in [1, {n1}], got {t_rank}")
    if not 2 <= roi_regions <= n1:
        raise ValueError(f"roi_regions must be in [2, {n1}], got {roi_regions}")
    if not 1 <= roi_signal_label <= roi_regions:
        raise ValueError(f"signal band {roi_signal_label} outside 1..{roi_regions}")

    rng = np.random.default_rng(seed)
    band = (np.arange(n1) * roi_regions) // n1 + 1
    roi = np.broadcast_to(
        band.reshape((n1, 1) + (1,) * len(trailing)).astype(float), (n1, 1) + trailing
    ).copy()
    mask = (band == roi_signal_label).astype(float)

    profile = np.array([1.0])
    for n in trailing:
        w = rng.standard_normal(n)
        profile = np.multiply.outer(profile, w / np.linalg.norm(w))
    profile = profile.reshape(trailing)

    total = class_count * trials_per_class
    samples = np.empty((n1, total) + trailing)
    labels = np.repeat(np.arange(class_count), trials_per_class)
    for ci in range(class_count):
        basis = _planted_basis(rng, n1, t_rank)
        for t in range(trials_per_class):
            spatial = mask * (basis @ rng.standard_normal(t_rank)) * np.sqrt(n1 / t_rank)
            x = np.multiply.outer(spatial, profile)
            if sigma:
                x = x + sigma * rng.standard_normal(x.shape)
            samples[:, ci * trials_per_class + t] = x
    return LabeledDataset(samples, labels, roi)


def _planted_basis(rng: np.random.Generator, n: int, r: int) -> np.ndarray:
    q, rr = np.linalg.qr(rng.standard_normal((n, r)))
    return q * np.where(np.diag(rr) >= 0, 1.0, -1.0)


def synth_digits(per_class: int, seed: int, size: int = 28, noise: float = 0.05) -> LabeledDataset:
    """Ring-versus-stroke digit images (a 0s-and-1s stand-in), values in [0, 1]."""
    rng = np.random.default_rng(seed)
    images = np.zeros((2 * per_class, size, size))
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    scale = size / 28.0
    for i in range(per_class):
        cx = size / 2 + rng.uniform(-2, 2) * scale
        cy = size / 2 + rng.uniform(-2, 2) * scale
        rx = rng.uniform(6, 9) * scale
        ry = rng.uniform(8, 11) * scale
        ring = np.abs(((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 - 1.0) < rng.uniform(0.18, 0.3)
        images[i] = ring * rng.uniform(0.7, 1.0)
    for i in range(per_class):
        cx = size / 2 + rng.uniform(-3, 3) * scale
        width = rng.uniform(1.2, 2.2) * scale
        slant = rng.uniform(-0.15, 0.15)
        span = (yy > 3 * scale) & (yy < size - 4 * scale)
        stroke = (np.abs(xx - (cx + slant * (yy - size / 2))) < width) & span
        images[per_class + i] = stroke * rng.uniform(0.7, 1.0)
    if noise:
        images = np.clip(images + noise * rng.standard_normal(images.shape), 0.0, 1.0)
    labels = np.repeat([0, 1], per_class)
    return LabeledDataset(np.ascontiguousarray(np.transpose(images, (1, 0, 2))), labels)
