import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from supersol import Domain, Eigenfunction, make_field, make_plan

settings.register_profile(
    "default", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")


@pytest.fixture(scope="session")
def dirichlet():
    return Domain.dirichlet()


@pytest.fixture(scope="session")
def dplan(dirichlet):
    return make_plan(dirichlet)


@pytest.fixture(scope="session")
def small_dirichlet():
    return Domain.dirichlet(grid_points=64, mode_cutoff=32)


@pytest.fixture(scope="session")
def small_periodic():
    return Domain.periodic(grid_points=16, mode_cutoff=8)


@pytest.fixture(scope="session")
def whole():
    return Domain.whole_space(12.0)


@pytest.fixture
def sine(dirichlet):
    return lambda a=1.0: make_field(dirichlet, Eigenfunction((1,), a))


def random_field(domain, rng, smooth=False):
    """Nonnegative field, zero on Dirichlet walls."""
    if smooth:
        X = domain.coordinates()
        v = np.zeros(domain.shape)
        for _ in range(3):
            c = [rng.uniform(0.2, 0.8) * L for L in domain.side_lengths]
            r2 = sum((x - ci) ** 2 for x, ci in zip(X, c))
            v += rng.uniform(0, 2) * np.exp(-r2 / rng.uniform(0.05, 0.5))
    else:
        v = rng.random(domain.shape) * rng.exponential()
    v[domain.boundary_mask()] = 0.0
    return v


def e(x):
    return math.exp(x)
