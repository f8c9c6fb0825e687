"""CCA, MCCA, DCCA and DMCCA as one generalized eigenproblem.

Every method builds a pair ``(C, D)``: ``D`` is block diagonal with the
auto-correlations ``x_i x_i^T`` and ``C`` adds cross-set blocks.  For the
plain methods the block ``(k, m)`` is ``x_k x_m^T``; the discriminative
methods weight it with the same-label indicator ``A``, i.e.
``x_k A x_m^T``, which is computed as a product of per-class sums.  The
projections are the leading eigenvectors of ``(C - D) w = rho D w``.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import (
    CenteringStats,
    DatasetError,
    LabelVector,
    MultisetDataset,
    apply_centering,
    center,
    class_sums,
    is_centered,
)
from .gev import GevProblem, RegularizationPolicy, solve_gev
from .io import atomic_write_text

POSITIVE_RTOL = 1e-9
DEGENERATE_QUAD = 1e-12


class FitError(ValueError):
    pass


class Method(str, enum.Enum):
    CCA = "CCA"
    MCCA = "MCCA"
    DCCA = "DCCA"
    DMCCA = "DMCCA"
    SERIAL = "SERIAL"

    @classmethod
    def parse(cls, value: "str | Method") -> "Method":
        if isinstance(value, Method):
            return value
        return cls(str(value).upper())

    @property
    def discriminative(self) -> bool:
        return self in (Method.DCCA, Method.DMCCA)

    @property
    def two_set(self) -> bool:
        return self in (Method.CCA, Method.DCCA)


class Fusion(str, enum.Enum):
    SUM = "FFS1_SUM"
    CONCAT = "FFS2_CONCAT"

    @classmethod
    def parse(cls, value: "str | Fusion") -> "Fusion":
        if isinstance(value, Fusion):
            return value
        aliases = {"sum": cls.SUM, "concat": cls.CONCAT}
        key = str(value)
        return aliases.get(key.lower()) or cls(key.upper())


@dataclass(frozen=True)
class MethodSpec:
    kind: Method
    fusion: Fusion = Fusion.SUM

    def __post_init__(self):
        object.__setattr__(self, "kind", Method.parse(self.kind))
        object.__setattr__(self, "fusion", Fusion.parse(self.fusion))

    def check(self, n_sets: int) -> None:
        if self.kind.two_set and n_sets != 2:
            raise FitError(f"{self.kind.value} needs exactly 2 feature sets, got {n_sets}")
        if self.kind is not Method.SERIAL and n_sets < 2:
            raise FitError(f"{self.kind.value} needs at least 2 feature sets, got {n_sets}")


@dataclass(frozen=True)
class CouplingPair:
    C: np.ndarray
    D: np.ndarray
    offsets: np.ndarray

    @property
    def left(self) -> np.ndarray:
        return self.C - self.D


@dataclass(frozen=True)
class ProjectionModel:
    blocks: tuple[np.ndarray, ...]
    eigenvalues: np.ndarray
    method: MethodSpec
    centering: CenteringStats
    d_max: int
    n_positive: int = 0
    sigma: float = 0.0
    degenerate: tuple[bool, ...] = field(default=())

    @property
    def d(self) -> int:
        return self.eigenvalues.size

    def truncate(self, d: int) -> "ProjectionModel":
        if not 1 <= d <= self.d:
            raise FitError(f"cannot truncate a {self.d}-dimensional model to d={d}")
        return ProjectionModel(
            tuple(w[:, :d] for w in self.blocks),
            self.eigenvalues[:d],
            self.method,
            self.centering,
            self.d_max,
            self.n_positive,
            self.sigma,
            self.degenerate[:d],
        )


@dataclass(frozen=True)
class FusedFeatures:
    values: np.ndarray
    labels: LabelVector | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DatasetError("fused features must be a 2-D array")
        if not np.all(np.isfinite(values)):
            raise DatasetError("fused features contain non-finite entries")
        if self.labels is not None and len(self.labels) != values.shape[1]:
            raise DatasetError("fused feature columns do not match label count")
        object.__setattr__(self, "values", values)


def _cross_blocks(dataset: MultisetDataset, discriminative: bool) -> dict:
    if discriminative:
        sums = [class_sums(x, dataset.labels) for x in dataset.sets]
        return {(k, m): sums[k] @ sums[m].T
                for k in range(dataset.n_sets) for m in range(k + 1, dataset.n_sets)}
    x = dataset.sets
    return {(k, m): x[k] @ x[m].T
            for k in range(dataset.n_sets) for m in range(k + 1, dataset.n_sets)}


def build_coupling(dataset: MultisetDataset, method: MethodSpec | Method,
                   identity_indicator: bool = False) -> CouplingPair:
    """Assemble ``(C, D)`` for a centered dataset.

    ``identity_indicator`` replaces ``A`` by the identity, which turns the
    discriminative builders into their plain counterparts.
    """
    if isinstance(method, Method):
        method = MethodSpec(method)
    if method.kind is Method.SERIAL:
        raise FitError("serial fusion has no coupling pair")
    method.check(dataset.n_sets)
    for i, x in enumerate(dataset.sets):
        if not is_centered(x):
            raise FitError(f"feature set {i} is not centered")
    discriminative = method.kind.discriminative and not identity_indicator
    if discriminative:
        counts = dataset.labels.counts()
        small = np.flatnonzero((counts > 0) & (counts < 2))
        if small.size:
            raise FitError(f"classes {small.tolist()} have fewer than 2 samples")

    offsets = dataset.offsets()
    q = offsets[-1]
    C = np.zeros((q, q))
    D = np.zeros((q, q))
    for i, x in enumerate(dataset.sets):
        auto = x @ x.T
        auto = 0.5 * (auto + auto.T)
        sl = slice(offsets[i], offsets[i + 1])
        C[sl, sl] = auto
        D[sl, sl] = auto
    for (k, m), block in _cross_blocks(dataset, discriminative).items():
        sk = slice(offsets[k], offsets[k + 1])
        sm = slice(offsets[m], offsets[m + 1])
        C[sk, sm] = block
        C[sm, sk] = block.T
    return CouplingPair(C, D, offsets)


def predicted_dim_bound(dataset: MultisetDataset) -> int:
    return int(min(dataset.n_classes, *dataset.dims))


def fit(dataset: MultisetDataset, method: MethodSpec | Method, d: int | None = None,
        identity_indicator: bool = False,
        policy: RegularizationPolicy = RegularizationPolicy()) -> ProjectionModel:
    """Fit projection blocks on an uncentered training set.

    Keeps the ``d`` leading eigenvectors with positive eigenvalue (default:
    all of them, up to the ``min(c, m_1..m_P)`` bound) and scales each so
    that ``sum_k w_k^T x_k x_k^T w_k = P``.
    """
    if isinstance(method, Method):
        method = MethodSpec(method)
    method.check(dataset.n_sets)
    if method.kind is Method.SERIAL:
        raise FitError("serial fusion is not fitted; use serial_fuse")
    if dataset.labels.present_classes() < 2:
        raise FitError("fitting needs at least two classes")
    d_max = predicted_dim_bound(dataset)
    if d is not None and not 1 <= d <= d_max:
        raise FitError(f"requested d={d} outside [1, {d_max}]")

    centered, stats = center(dataset)
    pair = build_coupling(centered, method, identity_indicator=identity_indicator)
    sol = solve_gev(GevProblem(pair.left, pair.D, policy))

    scale = np.abs(sol.values).max(initial=0.0)
    n_positive = int(np.count_nonzero(sol.values > POSITIVE_RTOL * scale))
    if n_positive < 1:
        raise FitError("no positive eigenvalue: the sets carry no usable cross-set correlation")
    if d is None:
        d = min(d_max, n_positive)
    elif d > n_positive:
        raise FitError(f"requested d={d} but only {n_positive} positive eigenvalues are available")

    vectors = sol.vectors[:, :d]
    quad = np.einsum("ij,ij->j", vectors, pair.D @ vectors)
    degenerate = quad < DEGENERATE_QUAD
    P = dataset.n_sets
    factors = np.sqrt(P / np.maximum(quad, DEGENERATE_QUAD))
    # near-null directions of D cannot meet the constraint; fall back to unit norm
    factors[degenerate] = 1.0 / np.linalg.norm(vectors[:, degenerate], axis=0)
    vectors = vectors * factors
    off = pair.offsets
    blocks = tuple(vectors[off[i]:off[i + 1]].copy() for i in range(P))
    return ProjectionModel(blocks, sol.values[:d].copy(), method, stats, d_max,
                           n_positive, sol.sigma, tuple(bool(b) for b in degenerate))


def project(model: ProjectionModel, dataset: MultisetDataset) -> list[np.ndarray]:
    if dataset.n_sets != len(model.blocks):
        raise FitError(f"model has {len(model.blocks)} sets, dataset has {dataset.n_sets}")
    for i, (w, x) in enumerate(zip(model.blocks, dataset.sets)):
        if w.shape[0] != x.shape[0]:
            raise FitError(f"set {i}: model expects {w.shape[0]} features, got {x.shape[0]}")
    centered = apply_centering(model.centering, dataset)
    return [w.T @ x for w, x in zip(model.blocks, centered.sets)]


def fuse(projected: Sequence[np.ndarray], strategy: Fusion | str = Fusion.SUM,
         labels: LabelVector | None = None) -> FusedFeatures:
    strategy = Fusion.parse(strategy)
    projected = [np.asarray(y, dtype=float) for y in projected]
    if not projected:
        raise FitError("nothing to fuse")
    shapes = {y.shape for y in projected}
    if len(shapes) != 1:
        raise FitError(f"projected sets disagree in shape: {sorted(shapes)}")
    if strategy is Fusion.SUM:
        values = np.sum(projected, axis=0)
    else:
        values = np.vstack(projected)
    return FusedFeatures(values, labels)


def serial_fuse(dataset: MultisetDataset, stats: CenteringStats | None = None) -> FusedFeatures:
    """Stack the centered raw sets; ``stats`` defaults to the dataset's own means."""
    if stats is None:
        dataset, _ = center(dataset)
    else:
        dataset = apply_centering(stats, dataset)
    return FusedFeatures(np.vstack(dataset.sets), dataset.labels)


def transform(model: ProjectionModel, dataset: MultisetDataset) -> FusedFeatures:
    return fuse(project(model, dataset), model.method.fusion, dataset.labels)


def model_to_dict(model: ProjectionModel) -> dict:
    return {
        "method": model.method.kind.value,
        "fusion": model.method.fusion.value,
        "d": model.d,
        "d_max": model.d_max,
        "eigenvalues": [float(v) for v in model.eigenvalues],
        "means": [[float(v) for v in mu] for mu in model.centering.means],
        "blocks": [[[float(v) for v in row] for row in w] for w in model.blocks],
        "n_positive": model.n_positive,
        "sigma": float(model.sigma),
    }


def model_from_dict(doc: dict) -> ProjectionModel:
    d = int(doc["d"])
    blocks = tuple(np.asarray(w, dtype=float).reshape(-1, d) for w in doc["blocks"])
    return ProjectionModel(
        blocks,
        np.asarray(doc["eigenvalues"], dtype=float),
        MethodSpec(Method(doc["method"]), Fusion(doc.get("fusion", Fusion.SUM.value))),
        CenteringStats(tuple(np.asarray(mu, dtype=float) for mu in doc["means"])),
        int(doc["d_max"]),
        int(doc.get("n_positive", d)),
        float(doc.get("sigma", 0.0)),
        (False,) * d,
    )


def save_model(model: ProjectionModel, path) -> None:
    # json writes floats with repr, which round-trips every double exactly
    atomic_write_text(path, json.dumps(model_to_dict(model)) + "\n")


def load_model(path) -> ProjectionModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
