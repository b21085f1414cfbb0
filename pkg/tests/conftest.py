import numpy as np
import pytest

from pwdi.fields import exact_interior_sources
from pwdi.geometry import make_sphere
from pwdi.mesh import make_trimesh_sphere


@pytest.fixture(scope="session")
def sphere8():
    return make_sphere(N=8)


@pytest.fixture(scope="session")
def sphere6():
    return make_sphere(N=6)


@pytest.fixture(scope="session")
def trisphere4():
    return make_trimesh_sphere(1.0, n=4)


@pytest.fixture(scope="session")
def trisphere2():
    return make_trimesh_sphere(1.0, n=2)


@pytest.fixture(scope="session")
def exact1():
    return exact_interior_sources(1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
