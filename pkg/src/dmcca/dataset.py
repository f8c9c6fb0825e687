"""Multiset sample containers, loaders and class-indicator helpers.

Feature sets are stored column-major: a set with ``m`` features over ``n``
samples is an ``(m, n)`` array, so sample ``j`` of set ``i`` is
``sets[i][:, j]``.  All sets of a :class:`MultisetDataset` share one label
vector.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .io import atomic_write_text

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
DENSE_INDICATOR_CAP = 2000


class DatasetError(ValueError):
    """Raised for malformed inputs or inconsistent multiset data."""


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    set_id: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DatasetError(f"feature matrix must be 2-D and nonempty, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DatasetError(f"feature set {self.set_id} contains non-finite entries")
        object.__setattr__(self, "values", values)

    @property
    def n_features(self) -> int:
        return self.values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LabelVector:
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise DatasetError("labels must be a 1-D vector")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.round(labels)):
                raise DatasetError("labels must be integers")
        labels = labels.astype(np.int64)
        if self.n_classes < 1:
            raise DatasetError("class count must be positive")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise DatasetError(f"labels must lie in [0, {self.n_classes})")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_labels(cls, labels, n_classes: int | None = None) -> "LabelVector":
        labels = np.asarray(labels, dtype=np.int64)
        if n_classes is None:
            n_classes = int(labels.max()) + 1 if labels.size else 1
        return cls(labels, n_classes)

    def __len__(self) -> int:
        return self.labels.size

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def present_classes(self) -> int:
        return int(np.count_nonzero(self.counts()))


@dataclass(frozen=True)
class CenteringStats:
    means: tuple[np.ndarray, ...]

    @property
    def n_sets(self) -> int:
        return len(self.means)


@dataclass(frozen=True)
class MultisetDataset:
    """``P >= 2`` feature sets over the same samples plus shared labels.

    Loaders may build single-set datasets (``P == 1``) for baselines; the
    fitting code rejects them.
    """

    sets: tuple[np.ndarray, ...]
    labels: LabelVector

    def __post_init__(self):
        sets = tuple(FeatureMatrix(s, i).values for i, s in enumerate(self.sets))
        if not sets:
            raise DatasetError("need at least one feature set")
        n = {s.shape[1] for s in sets}
        if len(n) != 1:
            raise DatasetError(f"feature sets disagree on sample count: {sorted(n)}")
        if len(self.labels) != sets[0].shape[1]:
            raise DatasetError(
                f"label count {len(self.labels)} does not match sample count {sets[0].shape[1]}"
            )
        object.__setattr__(self, "sets", sets)

    @classmethod
    def from_arrays(cls, sets: Sequence, labels, n_classes: int | None = None) -> "MultisetDataset":
        if not isinstance(labels, LabelVector):
            labels = LabelVector.from_labels(labels, n_classes)
        return cls(tuple(sets), labels)

    @property
    def n_sets(self) -> int:
        return len(self.sets)

    @property
    def n_samples(self) -> int:
        return self.sets[0].shape[1]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.shape[0] for s in self.sets)

    @property
    def total_dim(self) -> int:
        return sum(self.dims)

    @property
    def n_classes(self) -> int:
        return self.labels.n_classes

    def offsets(self) -> np.ndarray:
        """Start index of every set inside the stacked ``Q``-vector, plus ``Q``."""
        return np.concatenate([[0], np.cumsum(self.dims)]).astype(int)

    def select_sets(self, indices: Sequence[int]) -> "MultisetDataset":
        return MultisetDataset(tuple(self.sets[i] for i in indices), self.labels)

    def select_samples(self, idx) -> "MultisetDataset":
        idx = np.asarray(idx)
        labels = LabelVector(self.labels.labels[idx], self.labels.n_classes)
        return MultisetDataset(tuple(s[:, idx] for s in self.sets), labels)


def load_feature_table(path, n_classes: int | None = None, delimiter: str = ",",
                       set_id: int = 0) -> tuple[FeatureMatrix, LabelVector]:
    """Read a ``label,f1,f2,...`` table into a ``(features x samples)`` matrix.

    A first row whose leading cell is not numeric is treated as a header.
    Errors cite the 1-based line number of the offending row.
    """
    path = Path(path)
    labels: list[int] = []
    rows: list[list[float]] = []
    width = None
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter=delimiter), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and not _is_number(row[0]):
                continue
            if width is None:
                width = len(row)
                if width < 2:
                    raise DatasetError(f"{path}: line {lineno}: need a label and at least one feature")
            elif len(row) != width:
                raise DatasetError(
                    f"{path}: line {lineno}: expected {width} columns, found {len(row)}"
                )
            try:
                label_f = float(row[0])
            except ValueError:
                raise DatasetError(f"{path}: line {lineno}: label {row[0]!r} is not numeric") from None
            if label_f != int(label_f) or label_f < 0:
                raise DatasetError(f"{path}: line {lineno}: label {row[0]!r} must be a non-negative integer")
            try:
                feats = [float(c) for c in row[1:]]
            except ValueError as exc:
                raise DatasetError(f"{path}: line {lineno}: non-numeric feature ({exc})") from None
            labels.append(int(label_f))
            rows.append(feats)
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    values = np.asarray(rows, dtype=float).T
    return FeatureMatrix(values, set_id), LabelVector.from_labels(labels, n_classes)


def write_feature_table(path, features: np.ndarray, labels, header: bool = True) -> None:
    """Inverse of :func:`load_feature_table`; floats use shortest round-trip repr."""
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    lines = []
    if header:
        lines.append(",".join(["label"] + [f"f{k + 1}" for k in range(features.shape[0])]))
    for j in range(features.shape[1]):
        lines.append(",".join([str(int(labels[j]))] + [repr(float(v)) for v in features[:, j]]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_idx(images_path, labels_path) -> tuple[np.ndarray, LabelVector]:
    """Read an IDX image/label pair. Pixels are scaled to ``[0, 1]``.

    Returns an ``(n, rows, cols)`` float stack and a 10-class label vector.
    """
    images_path, labels_path = Path(images_path), Path(labels_path)
    for p in (images_path, labels_path):
        if not p.is_file():
            raise DatasetError(f"IDX file not found: {p}")
    raw = _read_maybe_gzip(images_path)
    if len(raw) < 16:
        raise DatasetError(f"{images_path}: truncated header")
    magic, n, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise DatasetError(f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}")
    need = n * rows * cols
    if len(raw) - 16 < need:
        raise DatasetError(f"{images_path}: truncated payload ({len(raw) - 16} of {need} bytes)")
    images = np.frombuffer(raw, dtype=np.uint8, count=need, offset=16).reshape(n, rows, cols)

    raw = _read_maybe_gzip(labels_path)
    if len(raw) < 8:
        raise DatasetError(f"{labels_path}: truncated header")
    magic, n_lab = struct.unpack(">II", raw[:8])
    if magic != IDX_LABELS_MAGIC:
        raise DatasetError(f"{labels_path}: bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}")
    if len(raw) - 8 < n_lab:
        raise DatasetError(f"{labels_path}: truncated payload ({len(raw) - 8} of {n_lab} bytes)")
    if n_lab != n:
        raise DatasetError(f"image/label count mismatch: {n} images, {n_lab} labels")
    labels = np.frombuffer(raw, dtype=np.uint8, count=n_lab, offset=8).astype(np.int64)
    return images.astype(float) / 255.0, LabelVector(labels, 10)


def write_idx(images_path, labels_path, images: np.ndarray, labels) -> None:
    """Write a uint8 image stack and labels in IDX layout (used for fixtures)."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    Path(images_path).write_bytes(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">II", IDX_LABELS_MAGIC, labels.size) + labels.tobytes())


def _read_maybe_gzip(path: Path) -> bytes:
    data = path.read_bytes()
    if data[:2] == b"\x1f\x8b":
        import gzip

        data = gzip.decompress(data)
    return data


def center(dataset: MultisetDataset) -> tuple[MultisetDataset, CenteringStats]:
    means = tuple(s.mean(axis=1) for s in dataset.sets)
    stats = CenteringStats(means)
    return apply_centering(stats, dataset), stats


def apply_centering(stats: CenteringStats, dataset: MultisetDataset) -> MultisetDataset:
    if stats.n_sets != dataset.n_sets:
        raise DatasetError(f"centering stats cover {stats.n_sets} sets, dataset has {dataset.n_sets}")
    out = []
    for i, (mu, x) in enumerate(zip(stats.means, dataset.sets)):
        if mu.shape[0] != x.shape[0]:
            raise DatasetError(f"set {i}: stats dimension {mu.shape[0]} != feature dimension {x.shape[0]}")
        out.append(x - mu[:, None])
    return MultisetDataset(tuple(out), dataset.labels)


def is_centered(x: np.ndarray, rtol: float = 1e-10) -> bool:
    """Every row sums to zero relative to its absolute-sum scale."""
    row_sum = np.abs(x.sum(axis=1))
    scale = np.abs(x).sum(axis=1)
    return bool(np.all(row_sum <= rtol * scale + np.finfo(float).tiny))


def class_sums(x: np.ndarray, labels: LabelVector) -> np.ndarray:
    """``S[:, l]`` is the sum of the columns of ``x`` labelled ``l``.

    ``class_sums(x) @ class_sums(y).T`` equals ``x @ A @ y.T`` for the
    same-label indicator ``A`` without forming the ``n x n`` matrix.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[1] != len(labels):
        raise DatasetError(f"labels length {len(labels)} != sample count {x.shape[1]}")
    onehot = np.zeros((x.shape[1], labels.n_classes))
    onehot[np.arange(x.shape[1]), labels.labels] = 1.0
    return x @ onehot


def build_indicator_dense(labels: LabelVector, cap: int = DENSE_INDICATOR_CAP) -> np.ndarray:
    """Dense same-label indicator (test oracle only)."""
    n = len(labels)
    if n > cap:
        raise DatasetError(f"dense indicator limited to n <= {cap}, got {n}")
    lab = labels.labels
    return (lab[:, None] == lab[None, :]).astype(float)
