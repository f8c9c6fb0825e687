import numpy as np
import pytest

from dmcca.dataset import LabelVector, MultisetDataset


def random_dataset(rng, dims, n, c, centered=False):
    labels = rng.permutation(np.arange(n) % c)
    sets = [rng.standard_normal((m, n)) + rng.standard_normal((m, c))[:, labels] for m in dims]
    if centered:
        sets = [x - x.mean(axis=1, keepdims=True) for x in sets]
    return MultisetDataset(tuple(sets), LabelVector(labels, c))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
