import numpy as np
import pytest

from defectline.config import Settings


@pytest.fixture
def settings() -> Settings:
    return Settings()


@pytest.fixture
def fast_settings() -> Settings:
    """Coarser seed grids and contours for tests that track many snapshots."""
    return Settings(GRID_DENSITY_2D=16, GRID_DENSITY_4D=8, CONTOUR_SAMPLES=128)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def cofactor_det(a: np.ndarray) -> complex:
    """Laplace expansion along the first row."""
    n = a.shape[0]
    if n == 1:
        return complex(a[0, 0])
    total = 0j
    for j in range(n):
        minor = np.delete(a[1:], j, axis=1)
        total += (-1) ** j * a[0, j] * cofactor_det(minor)
    return total


def random_complex(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    return scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
