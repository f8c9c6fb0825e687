"""1-nearest-neighbour recognition and accuracy-vs-dimension sweeps."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dataset import MultisetDataset, center
from .family import (
    FitError,
    FusedFeatures,
    Method,
    MethodSpec,
    ProjectionModel,
    fit,
    serial_fuse,
    transform,
)
from .io import atomic_write_json, atomic_write_text, fmt

CHUNK = 32


class ClassifyError(ValueError):
    pass


def _values(features) -> np.ndarray:
    if isinstance(features, FusedFeatures):
        return features.values
    return np.asarray(features, dtype=float)


def nn_classify(train, train_labels, test, chunk: int = CHUNK) -> np.ndarray:
    """Label of the closest training column (Euclidean) for every test column.

    Distances are formed from explicit differences so equal distances
    compare equal; ``argmin`` then keeps the smallest training index.
    """
    tr = _values(train)
    te = _values(test)
    labels = np.asarray(getattr(train_labels, "labels", train_labels))
    if tr.ndim != 2 or tr.shape[1] == 0:
        raise ClassifyError("training set is empty")
    if labels.size != tr.shape[1]:
        raise ClassifyError(f"{labels.size} labels for {tr.shape[1]} training samples")
    if te.shape[0] != tr.shape[0]:
        raise ClassifyError(f"feature dimension mismatch: train {tr.shape[0]}, test {te.shape[0]}")
    out = np.empty(te.shape[1], dtype=labels.dtype)
    for start in range(0, te.shape[1], chunk):
        block = te[:, start:start + chunk]
        diff = tr.T[None, :, :] - block.T[:, None, :]
        dist = np.einsum("ijk,ijk->ij", diff, diff)
        out[start:start + chunk] = labels[np.argmin(dist, axis=1)]
    return out


def evaluate_accuracy(predicted, truth) -> float:
    predicted = np.asarray(getattr(predicted, "labels", predicted))
    truth = np.asarray(getattr(truth, "labels", truth))
    if predicted.size == 0:
        raise ClassifyError("cannot score an empty prediction")
    if predicted.shape != truth.shape:
        raise ClassifyError(f"length mismatch: {predicted.size} predictions, {truth.size} labels")
    return int(np.count_nonzero(predicted == truth)) / predicted.size


@dataclass(frozen=True)
class SweepResult:
    method: MethodSpec
    entries: tuple[tuple[int, float], ...]
    d_max: int
    model: ProjectionModel | None = field(default=None, compare=False, repr=False)

    @property
    def best_accuracy(self) -> float:
        return max(acc for _, acc in self.entries)

    @property
    def best_d(self) -> int:
        best = self.best_accuracy
        return min(d for d, acc in self.entries if acc == best)

    def summary(self) -> dict:
        return {
            "method": self.method.kind.value,
            "fusion": self.method.fusion.value,
            "best_d": self.best_d,
            "best_accuracy": self.best_accuracy,
            "d_max": self.d_max,
        }

    def to_csv(self) -> str:
        rows = ["d,accuracy"] + [f"{d},{fmt(acc)}" for d, acc in self.entries]
        return "\n".join(rows) + "\n"

    def write(self, csv_path, json_path) -> None:
        atomic_write_text(csv_path, self.to_csv())
        atomic_write_json(json_path, self.summary())


def sweep_dimensions(train: MultisetDataset, test: MultisetDataset, method: MethodSpec | Method,
                     d_range: Iterable[int] | None = None) -> SweepResult:
    """Test accuracy for each projected dimension from a single fit.

    Eigenvectors do not depend on ``d``, so one fit at the largest
    requested dimension is truncated for the smaller ones.  Serial fusion
    has no projection; its curve is one entry at the stacked dimension.
    """
    if isinstance(method, Method):
        method = MethodSpec(method)
    if method.kind is Method.SERIAL:
        acc = serial_accuracy(train, test)
        q = train.total_dim
        return SweepResult(method, ((q, acc),), q)
    if d_range is None:
        model = fit(train, method)
        ds = list(range(1, model.d + 1))
    else:
        ds = sorted(set(int(d) for d in d_range))
        if not ds:
            raise FitError("empty d range")
        model = fit(train, method, d=ds[-1])
    entries = []
    for d in ds:
        sub = model.truncate(d)
        pred = nn_classify(transform(sub, train), train.labels, transform(sub, test))
        entries.append((d, evaluate_accuracy(pred, test.labels)))
    return SweepResult(method, tuple(entries), model.d_max, model)


def serial_accuracy(train: MultisetDataset, test: MultisetDataset) -> float:
    _, stats = center(train)
    tr = serial_fuse(train, stats)
    te = serial_fuse(test, stats)
    return evaluate_accuracy(nn_classify(tr, train.labels, te), test.labels)


def single_set_accuracies(train: MultisetDataset, test: MultisetDataset) -> list[float]:
    """1-NN accuracy of every feature set on its own."""
    return [serial_accuracy(train.select_sets([i]), test.select_sets([i]))
            for i in range(train.n_sets)]


def comparison_csv(results: Sequence[SweepResult]) -> str:
    rows = ["method,best_d,best_accuracy,d_max"]
    for r in results:
        rows.append(f"{r.method.kind.value},{r.best_d},{fmt(r.best_accuracy)},{r.d_max}")
    return "\n".join(rows) + "\n"


def read_sweep_csv(text: str) -> list[tuple[int, float]]:
    lines = text.strip().splitlines()
    if lines[0] != "d,accuracy":
        raise ValueError("not a sweep CSV")
    return [(int(d), float(a)) for d, a in (line.split(",") for line in lines[1:])]
