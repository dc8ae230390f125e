import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_bistochastic_product(rng, d, n_factors=None):
    """Product of random T-transforms on random pairs; a bistochastic matrix."""
    n_factors = d if n_factors is None else n_factors
    m = np.eye(d)
    for _ in range(n_factors):
        i, j = rng.choice(d, size=2, replace=False)
        s = rng.uniform()
        t = np.eye(d)
        t[i, i] = t[j, j] = 1 - s
        t[i, j] = t[j, i] = s
        m = t @ m
    return m


def random_majorized_pair(rng, d):
    p = rng.dirichlet(np.full(d, 0.5))
    q = random_bistochastic_product(rng, d) @ p
    q = q / q.sum()
    return p, q
