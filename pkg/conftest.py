"""
Shared pytest fixtures for the RPC fitter tests.
"""

import numpy as np
import pytest

from tools.grid import GridBounds, GridSpec
from tools.rpc_model import NormalizationParams
from tools.sensors import LocalTangentPlane, PinholeSensor, PushbroomSensor, random_rpc_model

CENTER = (2.35, 48.85)
ALT_RANGE = (0.0, 500.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def bounds():
    """Roughly 0.2 degree square footprint."""
    return GridBounds.centered(CENTER, 0.1, ALT_RANGE)


@pytest.fixture
def frame(bounds):
    return LocalTangentPlane.from_bounds(bounds)


@pytest.fixture
def norm():
    return NormalizationParams(
        lon_offset=CENTER[0], lon_scale=0.1,
        lat_offset=CENTER[1], lat_scale=0.1,
        alt_offset=250.0, alt_scale=250.0,
        row_offset=5000.0, row_scale=5000.0,
        col_offset=5000.0, col_scale=5000.0,
    )


@pytest.fixture
def rpc(rng, norm):
    return random_rpc_model(rng, norm)


@pytest.fixture
def pinhole(frame):
    """Nadir frame camera at 500 km with 5 m ground sampling."""
    return PinholeSensor.looking_down(
        frame=frame,
        center=(0.0, 0.0, 500e3),
        focal=1e5,
        principal_point=(5000.0, 5000.0),
    )


@pytest.fixture
def pushbroom(frame):
    """North-bound line scanner at 500 km with 5 m ground sampling and slow pitch jitter."""
    return PushbroomSensor(
        frame=frame,
        position=(0.0, -15e3, 500e3),
        velocity=(0.0, 7000.0, 0.0),
        line_period=5.0 / 7000.0,
        focal_ratio=1e5,
        col_offset=5000.0,
        jitter_amplitude=5e-8,
        jitter_period=30.0,
    )


@pytest.fixture
def small_spec(bounds):
    return GridSpec(bounds=bounds, n_lonlat=20, n_alt=10)
