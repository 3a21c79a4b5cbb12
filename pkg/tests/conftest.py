"""Shared fixtures. Session scope for anything holding an eigendecomposition."""

from __future__ import annotations

import numpy as np
import pytest

from w2lab import build_generator, build_grid_measure


def ou_potential(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * x


def doublewell_potential(x: np.ndarray) -> np.ndarray:
    return x**4 - 2.0 * x * x


@pytest.fixture(scope="session")
def ou():
    return build_grid_measure(ou_potential, (-8.0, 8.0), 1025)


@pytest.fixture(scope="session")
def ou_gen(ou):
    return build_generator(ou)


@pytest.fixture(scope="session")
def ou_small():
    return build_grid_measure(ou_potential, (-8.0, 8.0), 257)


@pytest.fixture(scope="session")
def ou_small_gen(ou_small):
    return build_generator(ou_small)


@pytest.fixture(scope="session")
def doublewell():
    return build_grid_measure(doublewell_potential, (-3.0, 3.0), 1025)


@pytest.fixture(scope="session")
def doublewell_gen(doublewell):
    return build_generator(doublewell)


@pytest.fixture(scope="session")
def uniform():
    return build_grid_measure(lambda x: np.zeros_like(x), (0.0, 1.0), 257, tail_mass=0.0)


@pytest.fixture(scope="session")
def uniform_gen(uniform):
    return build_generator(uniform)
