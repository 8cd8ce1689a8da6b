"""
Shared fixtures for the loop solver test suite
"""

import numpy as np
import pytest

from utils.fields import FieldCatalog
from utils.loopgeom import Interpolation, LoopCurve


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long end-to-end runs (deselect with -m 'not slow')")


@pytest.fixture(scope="session")
def catalog():
    return FieldCatalog()


@pytest.fixture(scope="session")
def unit_field(catalog):
    """K = 1 everywhere"""
    return catalog.build("constant", c=1.0)


@pytest.fixture(scope="session")
def periodic_field(catalog):
    """K = 1 + 0.5 sin(2 pi x) sin(2 pi y)"""
    return catalog.build("periodic_sine")


@pytest.fixture(scope="session")
def lobe_field(catalog):
    return catalog.build("gaussian_lobe")


@pytest.fixture(scope="session")
def catalog_fields(catalog):
    return {entry.name: entry.build() for entry in catalog.list_entries()}


def smooth_loop(seed: int, points: int = 128, modes: int = 4, amplitude: float = 0.25,
                interpolation: Interpolation = Interpolation.TRIGONOMETRIC) -> LoopCurve:
    """Seeded circle plus a few low Fourier modes; the perturbation never cancels the speed"""
    rng = np.random.default_rng(seed)
    t = np.arange(points) / points
    radius = rng.uniform(0.5, 2.0)
    z = radius * np.exp(2j * np.pi * t)
    for m in range(2, modes + 1):
        for sign in (1, -1):
            coefficient = complex(*rng.uniform(-1.0, 1.0, size=2))
            z = z + amplitude * radius * coefficient / m ** 2 * np.exp(2j * np.pi * sign * m * t)
    z = z + complex(*rng.uniform(-2.0, 2.0, size=2))
    return LoopCurve(np.column_stack([z.real, z.imag]), interpolation)


@pytest.fixture(scope="session")
def random_loop():
    """Factory for seeded smooth loops"""
    return smooth_loop
