import numpy as np
import pytest

from app.designs.fixtures import build_nested_design, build_welding_fixture


@pytest.fixture
def welding():
    return build_welding_fixture()


@pytest.fixture
def welding_geometry():
    return build_welding_fixture(with_geometry=True)


@pytest.fixture
def nested():
    """3 x 3 nested design with coded geometry (0, 2/3, 1/3)"""
    return build_nested_design((1.0, 2.0, 3.0), center=(10.0, 2.0), half_width=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
