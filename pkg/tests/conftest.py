import numpy as np
import pytest

from lapgm.data import Dataset


def make_poisson_data(n=50, m=10, seed=1234):
    """Simulated Poisson regression: intercept 0, slope 1 on w, iid groups."""
    rng = np.random.default_rng(seed)
    idx = np.tile(np.arange(1, m + 1), -(-n // m))[:n].astype(float)
    w = rng.normal(scale=1.0 / 3.0, size=n)
    u = rng.normal(scale=0.25, size=m)
    y = rng.poisson(np.exp(w + u[(idx - 1).astype(int)])).astype(float)
    return Dataset({"y": y, "w": w, "idx": idx})


def make_conjugate_data(n=50, m=10, seed=42):
    """Gaussian observations on iid group effects (closed-form posterior)."""
    rng = np.random.default_rng(seed)
    idx = np.tile(np.arange(1, m + 1), -(-n // m))[:n].astype(float)
    u = rng.normal(scale=0.5, size=m)
    y = u[(idx - 1).astype(int)] + rng.normal(scale=0.5, size=n)
    return Dataset({"y": y, "g": idx})


@pytest.fixture(scope="session")
def poisson_data():
    return make_poisson_data()


@pytest.fixture(scope="session")
def conjugate_data():
    return make_conjugate_data()
