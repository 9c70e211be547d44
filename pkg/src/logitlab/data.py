"""Deterministic dataset construction and file ingestion.

Everything here is a pure function of (spec/bytes, seed): rerunning with
the same arguments reproduces the same Dataset bit for bit.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class BlobSpec:
    """Synthetic Gaussian blobs: K class means on a sphere, isotropic noise."""

    num_classes: int
    dim: int
    samples_per_class: int
    within_std: float = 1.0
    mean_radius: float = 3.0
    label_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.dim < 1 or self.samples_per_class < 1:
            raise ValueError("dim and samples_per_class must be >= 1")
        if self.within_std <= 0.0 or self.mean_radius <= 0.0:
            raise ValueError("within_std and mean_radius must be > 0")
        if not 0.0 <= self.label_noise < 1.0:
            raise ValueError(f"label_noise must lie in [0, 1), got {self.label_noise}")


@dataclass(frozen=True)
class ImbalanceSpec:
    """Exponential long-tail profile; ratio = most / least frequent class."""

    ratio: float

    def __post_init__(self):
        if self.ratio < 1.0:
            raise ValueError(f"imbalance ratio must be >= 1, got {self.ratio}")


@dataclass
class Dataset:
    inputs: np.ndarray  # (N, D) float64
    labels: np.ndarray  # (N,) int64
    class_counts: np.ndarray  # (K,) int64, counts of the stored labels

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2 or self.labels.ndim != 1:
            raise ValueError("inputs must be (N, D) and labels (N,)")
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ValueError("inputs and labels disagree on N")
        self.class_counts = np.asarray(self.class_counts, dtype=np.int64)

    @property
    def num_classes(self) -> int:
        return int(self.class_counts.size)


def _dataset_from_labels(inputs: np.ndarray, labels: np.ndarray, num_classes: int) -> Dataset:
    counts = np.bincount(labels, minlength=num_classes).astype(np.int64)
    return Dataset(inputs=inputs, labels=labels, class_counts=counts)


def _blob_means(rng: np.random.Generator, spec: BlobSpec) -> np.ndarray:
    means = rng.standard_normal((spec.num_classes, spec.dim))
    norms = np.linalg.norm(means, axis=1, keepdims=True)
    return spec.mean_radius * means / norms


def _draw_blob_samples(
    rng: np.random.Generator, means: np.ndarray, spec: BlobSpec, per_class: int, label_noise: float
) -> Dataset:
    k, d = means.shape
    inputs = np.empty((k * per_class, d))
    labels = np.empty(k * per_class, dtype=np.int64)
    for c in range(k):
        block = slice(c * per_class, (c + 1) * per_class)
        inputs[block] = means[c] + spec.within_std * rng.standard_normal((per_class, d))
        labels[block] = c
    if label_noise > 0.0:
        flip = rng.random(labels.size) < label_noise
        # replace with a uniform draw over the K-1 wrong classes
        offsets = rng.integers(1, k, size=labels.size)
        labels = np.where(flip, (labels + offsets) % k, labels)
    return _dataset_from_labels(inputs, labels, k)


def make_blobs(spec: BlobSpec) -> Dataset:
    """Seeded Gaussian blobs with optional uniform-wrong-class label noise."""
    rng = np.random.default_rng(spec.seed)
    means = _blob_means(rng, spec)
    return _draw_blob_samples(rng, means, spec, spec.samples_per_class, spec.label_noise)


def make_blob_splits(spec: BlobSpec, val_per_class: int, val_label_noise: float = 0.0) -> tuple[Dataset, Dataset]:
    """Train/val blob pair sharing class means but with disjoint sample draws.

    The train split follows ``spec`` (including its label noise); the val
    split draws ``val_per_class`` fresh samples per class from the same
    means, by default with clean labels.
    """
    if val_per_class < 1:
        raise ValueError(f"val_per_class must be >= 1, got {val_per_class}")
    rng = np.random.default_rng(spec.seed)
    means = _blob_means(rng, spec)
    train = _draw_blob_samples(rng, means, spec, spec.samples_per_class, spec.label_noise)
    val = _draw_blob_samples(rng, means, spec, val_per_class, val_label_noise)
    return train, val


def subsample_longtail(d: Dataset, spec: ImbalanceSpec, seed: int) -> Dataset:
    """Keep n_max * ratio^(-c / (K-1)) samples of class c (rounded, >= 1).

    Selection within a class is a seeded random subset; kept rows stay in
    their original order, so input/label pairing is untouched.
    """
    k = d.num_classes
    if k < 2:
        raise ValueError("long-tail subsampling needs at least two classes")
    n_max = int(d.class_counts.max())
    rng = np.random.default_rng(seed)
    keep: list[np.ndarray] = []
    for c in range(k):
        target = max(1, int(n_max * spec.ratio ** (-c / (k - 1)) + 0.5))
        idx = np.flatnonzero(d.labels == c)
        if idx.size < target:
            raise ValueError(
                f"class {c} has {idx.size} samples but the imbalance profile needs {target}"
            )
        keep.append(rng.permutation(idx)[:target])
    kept = np.sort(np.concatenate(keep))
    return _dataset_from_labels(d.inputs[kept], d.labels[kept], k)


def mixup_pairs(batch, a: float, seed) -> list[tuple[int, int, float]]:
    """Pair every batch element with a shuffled partner and a Beta(a, a) weight."""
    if a <= 0.0:
        raise ValueError(f"beta concentration must be > 0, got {a}")
    batch = np.asarray(batch, dtype=np.int64)
    rng = np.random.default_rng(seed)
    partners = batch[rng.permutation(batch.size)]
    lams = rng.beta(a, a, size=batch.size)
    return [(int(i), int(j), float(lam)) for i, j, lam in zip(batch, partners, lams)]


# ---------------------------------------------------------------------------
# File formats. CSV is the interchange format for feature dumps; IDX is the
# big-endian binary layout with magics 0x803 (images) / 0x801 (labels).
# ---------------------------------------------------------------------------


def save_features_csv(path, rows: np.ndarray, labels: np.ndarray) -> None:
    """Write `label,f0,f1,...` rows; floats use repr so loads round-trip exactly."""
    rows = np.asarray(rows, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["label"] + [f"f{i}" for i in range(rows.shape[1])])
        for label, row in zip(labels, rows):
            writer.writerow([int(label)] + [repr(float(v)) for v in row])


def load_csv(path) -> Dataset:
    """Read a `label,f0,f1,...` feature CSV; errors name the offending line."""
    inputs: list[list[float]] = []
    labels: list[int] = []
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row") from None
        if not header or header[0] != "label":
            raise ValueError(f"{path}: line 1: header must start with 'label', got {header[:1]}")
        width = len(header) - 1
        if width < 1:
            raise ValueError(f"{path}: line 1: header declares no feature columns")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != width + 1:
                raise ValueError(
                    f"{path}: line {lineno}: expected {width + 1} fields, got {len(row)}"
                )
            try:
                labels.append(int(row[0]))
                inputs.append([float(v) for v in row[1:]])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: unparsable numeric field") from None
    if not labels:
        raise ValueError(f"{path}: no data rows")
    labels_arr = np.asarray(labels, dtype=np.int64)
    if labels_arr.min() < 0:
        raise ValueError(f"{path}: negative class label")
    return _dataset_from_labels(np.asarray(inputs), labels_arr, int(labels_arr.max()) + 1)


def _read_exact(fh, n: int, path, offset: int) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise ValueError(f"{path}: truncated at byte {offset + len(buf)}, needed {n - len(buf)} more")
    return buf


def load_idx(images_path, labels_path) -> Dataset:
    """Read an IDX image/label file pair; pixels are scaled to [0, 1]."""
    with open(images_path, "rb") as fh:
        head = _read_exact(fh, 16, images_path, 0)
        magic, count, nrows, ncols = struct.unpack(">IIII", head)
        if magic != IDX_IMAGES_MAGIC:
            raise ValueError(
                f"{images_path}: byte 0: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"
            )
        pixels = _read_exact(fh, count * nrows * ncols, images_path, 16)
    with open(labels_path, "rb") as fh:
        head = _read_exact(fh, 8, labels_path, 0)
        magic, label_count = struct.unpack(">II", head)
        if magic != IDX_LABELS_MAGIC:
            raise ValueError(
                f"{labels_path}: byte 0: bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"
            )
        raw_labels = _read_exact(fh, label_count, labels_path, 8)
    if label_count != count:
        raise ValueError(
            f"{labels_path}: {label_count} labels but {images_path} holds {count} images"
        )
    inputs = np.frombuffer(pixels, dtype=np.uint8).astype(np.float64).reshape(count, nrows * ncols)
    inputs /= 255.0
    labels = np.frombuffer(raw_labels, dtype=np.uint8).astype(np.int64)
    return _dataset_from_labels(inputs, labels, int(labels.max()) + 1 if count else 0)
