import numpy as np
import pytest

from dpmi import datasets, nn


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_separable(n=80, seed=0):
    """Two linearly separable 2-d classes."""
    r = np.random.default_rng(seed)
    half = n // 2
    a = r.normal((2.0, 2.0), 0.4, size=(half, 2))
    b = r.normal((-2.0, -2.0), 0.4, size=(half, 2))
    feats = np.concatenate([a, b])
    labels = np.concatenate([np.zeros(half, np.int64), np.ones(half, np.int64)])
    order = r.permutation(n)
    return datasets.Dataset(feats[order], labels[order], "real", 2)


@pytest.fixture
def separable_train():
    return make_separable(seed=0)


@pytest.fixture
def separable_test():
    return make_separable(seed=1)


def tiny_net(sizes, seed=0):
    return nn.build_network(sizes, np.random.default_rng(seed))
