import numpy as np
import pytest

from app.fixtures.fixtures import equator_samples, free_combination, octagon, polar_circle_samples, schottky
from app.kleinian.group import sample_limit_set
from app.kleinian.sphere import build_raster, chart_from_labels, chart_from_samples

OCTAGON_DEPTH = 4
SCHOTTKY_DEPTH = 6


@pytest.fixture(scope="session")
def raster8():
    return build_raster(8)


@pytest.fixture(scope="session")
def raster32():
    return build_raster(32)


@pytest.fixture(scope="session")
def equator_chart(raster32):
    return chart_from_samples(raster32, equator_samples())


@pytest.fixture(scope="session")
def polar_chart(raster32):
    return chart_from_samples(raster32, polar_circle_samples())


@pytest.fixture(scope="session")
def hemisphere_chart(raster32):
    """North and south hemispheres as two labels with nothing marked between them."""
    labels = (raster32.centers[:, 2] < 0).astype(int)
    return chart_from_labels(raster32, labels)


@pytest.fixture(scope="session")
def octagon_group():
    return octagon()


@pytest.fixture(scope="session")
def octagon_samples(octagon_group):
    return sample_limit_set(octagon_group, OCTAGON_DEPTH)


@pytest.fixture(scope="session")
def octagon_chart(raster32, octagon_samples):
    return chart_from_samples(raster32, octagon_samples)


@pytest.fixture(scope="session")
def schottky_group():
    return schottky()


@pytest.fixture(scope="session")
def schottky_samples(schottky_group):
    return sample_limit_set(schottky_group, SCHOTTKY_DEPTH)


@pytest.fixture(scope="session")
def schottky_chart(raster32, schottky_samples):
    return chart_from_samples(raster32, schottky_samples)


@pytest.fixture(scope="session")
def combination_group():
    return free_combination()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
