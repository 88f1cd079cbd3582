import numpy as np
import pytest

from flowpde.lattice import LatticeSpec
from flowpde.model import preset
from flowpde.noise import NoiseModel


@pytest.fixture
def desk_spec():
    """Small d=1, sigma=1/2 lattice with enough history for mu <= 1 kernels."""
    return LatticeSpec(1, 64, 0.02, -2.0, 1.0, 0.5)


@pytest.fixture
def desk_noise():
    return NoiseModel(
        "mollified_white", 0.1, 11, "bump", resolution_policy="spectral"
    )


@pytest.fixture
def desk_model(desk_noise):
    return preset("phi4_desk", lam=0.3, noise=desk_noise)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
