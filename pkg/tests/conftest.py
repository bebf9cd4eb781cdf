import numpy as np
import pytest

from doormpc.params import ArmParams, DoorGeometry, VehicleParams


@pytest.fixture
def geom():
    return DoorGeometry()


@pytest.fixture
def arm():
    return ArmParams()


@pytest.fixture
def vehicle():
    return VehicleParams()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
