"""Seeded synthetic multiset data with known class structure.

Sample ``j`` of set ``i`` is ``mu[i][y_j] + strength * W_i z_j + noise * e``:
a per-set class mean, a latent signal ``z_j`` shared by all sets of the
same sample (correlated across sets but unrelated to the class), and
independent Gaussian noise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LabelVector, MultisetDataset


@dataclass(frozen=True)
class SyntheticSpec:
    n_sets: int = 3
    n_classes: int = 6
    n_train: int = 300
    n_test: int = 120
    dims: tuple[int, ...] = (20, 20, 30)
    separation: float = 1.0
    shared_strength: float = 1.0
    noise: float = 2.0
    latent_dim: int = 3
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(m) for m in self.dims))
        if len(self.dims) != self.n_sets:
            raise ValueError(f"{len(self.dims)} dimensions given for {self.n_sets} sets")
        if min(self.n_sets, self.n_train, self.n_test, self.latent_dim, *self.dims) < 1:
            raise ValueError("all counts must be positive")
        if self.n_classes < 2:
            raise ValueError("need at least two classes")
        if min(self.separation, self.shared_strength, self.noise) < 0:
            raise ValueError("scales must be non-negative")


def _labels(rng: np.random.Generator, n: int, c: int) -> np.ndarray:
    return rng.permutation(np.arange(n) % c)


def generate(spec: SyntheticSpec) -> tuple[MultisetDataset, MultisetDataset]:
    rng = np.random.default_rng(spec.seed)
    means = [spec.separation * rng.standard_normal((m, spec.n_classes)) for m in spec.dims]
    mixing = [rng.standard_normal((m, spec.latent_dim)) / np.sqrt(spec.latent_dim) for m in spec.dims]

    def draw(n):
        y = _labels(rng, n, spec.n_classes)
        z = rng.standard_normal((spec.latent_dim, n))
        sets = tuple(mu[:, y] + spec.shared_strength * (w @ z) + spec.noise * rng.standard_normal((mu.shape[0], n))
                     for mu, w in zip(means, mixing))
        return MultisetDataset(sets, LabelVector(y, spec.n_classes))

    return draw(spec.n_train), draw(spec.n_test)
