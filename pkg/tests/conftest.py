import numpy as np
import pytest

from quadlab.distributions import EmpiricalSample, make_sample


def random_sample(rng, max_n: int = 50) -> EmpiricalSample:
    """Random finite sample: continuous atoms, sometimes non-uniform weights."""
    n = int(rng.integers(1, max_n + 1))
    atoms = rng.standard_normal(n) * rng.uniform(0.5, 3.0) + rng.uniform(-2, 2)
    if rng.random() < 0.3:
        weights = rng.uniform(0.05, 1.0, size=n)
        return make_sample(atoms, weights)
    return make_sample(atoms)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
