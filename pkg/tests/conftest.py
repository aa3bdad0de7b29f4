import numpy as np
import pytest

from synergraph.data import synth_dataset, user_split


@pytest.fixture(scope="session")
def small_dataset():
    """50 users x 40 items clustered fixture with 8-dim features."""
    ds, fv, ft = synth_dataset(50, 40, 5, 8, 8, seed=1)
    return ds, fv, ft


@pytest.fixture(scope="session")
def small_split(small_dataset):
    ds, _fv, _ft = small_dataset
    return user_split(ds, seed=1)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
