import numpy as np
import pytest

from ddgmps import mesh as meshmod


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def uniform_mesh():
    return meshmod.generate_structured(8, 8, periodic=True)


@pytest.fixture(scope="session")
def dirichlet_mesh():
    return meshmod.generate_structured(6, 6, periodic=False)


@pytest.fixture(scope="session")
def obtuse_mesh():
    return meshmod.generate_structured(8, 8, pattern="obtuse", periodic=True)


@pytest.fixture(scope="session")
def perturbed_mesh():
    return meshmod.generate_perturbed(6, 6, np.random.default_rng(7))
