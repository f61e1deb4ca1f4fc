import numpy as np
import pytest

from dysarar.score import MappingBounds, NaturalParams
from dysarar.simlab import random_weight_matrix
from dysarar.weights import WeightMatrix


@pytest.fixture
def swap2():
    """The 2-unit exchange matrix [[0, 1], [1, 0]]."""
    return WeightMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))


@pytest.fixture
def w_pair_4():
    return random_weight_matrix(4, 0.8, 1), random_weight_matrix(4, 0.8, 2)


@pytest.fixture
def bounds():
    return MappingBounds()


def random_natural(rng, n, k, rho_scale=0.8, lam_scale=0.8):
    """Admissible random parameters for row-standardized weights."""
    return NaturalParams(
        rho=rho_scale * rng.uniform(-1.0, 1.0),
        lam=lam_scale * rng.uniform(-1.0, 1.0),
        beta=rng.normal(size=k),
        sigma=np.exp(rng.uniform(-1.0, 1.0, size=n)),
    )
