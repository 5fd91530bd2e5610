"""
Test script for the grid module.
This script tests CNP/CKP grid generation and correspondence building.
"""

import logging

import numpy as np
import pytest

from tools.grid import (
    CorrespondenceSet,
    GeolocationModel,
    GridBounds,
    GridSpec,
    build_correspondences,
    generate_ckp_grid,
    generate_cnp_grid,
    project_points,
)
from tools.sensors import PinholeSensor
from utils.errors import InvalidSpec, OutOfBounds, SensorProjectionError

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler()]
)
logger = logging.getLogger(__name__)


def test_cnp_grid_shape_and_order(bounds):
    """Test the CNP grid size and its altitude-major ordering."""
    logger.info("Testing CNP grid...")
    spec = GridSpec(bounds=bounds, n_lonlat=4, n_alt=3)
    grid = generate_cnp_grid(spec)
    assert grid.shape == (4 * 4 * 3, 3)
    # first row of the first layer: longitude varies, latitude and altitude fixed
    np.testing.assert_allclose(grid[:4, 0], np.linspace(bounds.lon_min, bounds.lon_max, 4))
    assert np.all(grid[:4, 1] == bounds.lat_min)
    assert np.all(grid[:16, 2] == bounds.alt_min)
    assert np.all(grid[-16:, 2] == bounds.alt_max)
    assert grid[:, 0].min() == bounds.lon_min and grid[:, 0].max() == bounds.lon_max


def test_default_grid_size(bounds):
    grid = generate_cnp_grid(GridSpec(bounds=bounds))
    assert grid.shape == (50 * 50 * 10, 3)


def test_ckp_grid_midpoints(bounds):
    spec = GridSpec(bounds=bounds, n_lonlat=5, n_alt=3)
    ckp = generate_ckp_grid(spec)
    assert ckp.shape == (4 * 4 * 2, 3)
    lons = np.linspace(bounds.lon_min, bounds.lon_max, 5)
    np.testing.assert_allclose(np.unique(ckp[:, 0]), (lons[:-1] + lons[1:]) / 2.0)
    assert np.all(ckp[:, 0] > bounds.lon_min) and np.all(ckp[:, 0] < bounds.lon_max)
    assert np.all(ckp[:, 2] > bounds.alt_min) and np.all(ckp[:, 2] < bounds.alt_max)


def test_minimal_grid_has_single_ckp(bounds):
    ckp = generate_ckp_grid(GridSpec(bounds=bounds, n_lonlat=2, n_alt=2))
    np.testing.assert_allclose(ckp, [bounds.center])


def test_grid_spec_rejects_short_axes(bounds):
    with pytest.raises(InvalidSpec):
        GridSpec(bounds=bounds, n_lonlat=1, n_alt=10)
    with pytest.raises(InvalidSpec):
        GridSpec(bounds=bounds, n_lonlat=10, n_alt=1)


def test_grid_bounds_validation():
    with pytest.raises(InvalidSpec):
        GridBounds(lon_min=1.0, lon_max=1.0, lat_min=0.0, lat_max=1.0, alt_min=0.0, alt_max=1.0)
    with pytest.raises(InvalidSpec):
        GridBounds(lon_min=0.0, lon_max=1.0, lat_min=0.0, lat_max=1.0, alt_min=2.0, alt_max=1.0)
    with pytest.raises(InvalidSpec):
        GridBounds.centered((0.0, 0.0), 0.0, (0.0, 1.0))


def test_sensors_satisfy_protocol(pinhole, rpc):
    assert isinstance(pinhole, GeolocationModel)
    assert isinstance(rpc, GeolocationModel)


def test_build_correspondences_normalizes_extents(pinhole, small_spec):
    data = build_correspondences(pinhole, generate_cnp_grid(small_spec))
    assert len(data) == 20 * 20 * 10
    x, y, z, r, c = data.normalized()
    for v in (x, y, z, r, c):
        assert v.min() == pytest.approx(-1.0, abs=1e-12)
        assert v.max() == pytest.approx(1.0, abs=1e-12)
    assert data.warnings == []


def test_threaded_projection_keeps_order(pinhole, small_spec):
    points = generate_cnp_grid(small_spec)
    row1, col1 = project_points(pinhole, points, threads=1)
    row4, col4 = project_points(pinhole, points, threads=4)
    np.testing.assert_array_equal(row1, row4)
    np.testing.assert_array_equal(col1, col4)


def test_projection_failure_reports_index(frame, bounds):
    """Test that a sensor failure names the offending point."""
    inner = GridBounds.centered((bounds.center[0], bounds.center[1]), 0.05, (0.0, 500.0))
    sensor = PinholeSensor.looking_down(frame, (0.0, 0.0, 500e3), 1e5, bounds=inner)
    points = np.array([
        [bounds.center[0], bounds.center[1], 100.0],
        [bounds.center[0] + 0.01, bounds.center[1], 100.0],
        [bounds.lon_max, bounds.center[1], 100.0],
    ])
    with pytest.raises(SensorProjectionError) as info:
        build_correspondences(sensor, points)
    assert info.value.index == 2
    assert isinstance(info.value.cause, OutOfBounds)


def test_empty_points_rejected(pinhole):
    with pytest.raises(InvalidSpec):
        build_correspondences(pinhole, np.zeros((0, 3)))


def test_correspondence_set_rejects_non_finite():
    values = np.linspace(0.0, 1.0, 5)
    with pytest.raises(InvalidSpec):
        CorrespondenceSet.from_arrays(values, values, values, np.append(values[:-1], np.nan), values)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
