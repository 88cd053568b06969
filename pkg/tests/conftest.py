import numpy as np
import pytest

from holotomo.fields import AxialBox, Field2D, FieldVolume, GridSpec


def small_grid(n=16, ny=None, dx=0.25, dz=0.75):
    return GridSpec(n, ny or n, dx, dx, dz, 0.65, 0.75)


def crandn(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_field(rng, grid):
    return Field2D(grid, crandn(rng, grid.shape))


def random_volume(rng, grid, nz=3, z_center=5.0):
    return FieldVolume(grid, z_center, crandn(rng, (nz,) + grid.shape))


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.linalg.norm(a - b) / np.linalg.norm(b)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid16():
    return small_grid(16)


@pytest.fixture
def box3():
    return AxialBox(3, 5.0)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for num in sorted(results):
            terminalreporter.write_line(results[num])
