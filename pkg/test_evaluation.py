"""
Test script for the evaluation module.
This script tests check point RMSE and the grid-length and surface-area sweeps.
"""

import io
import json
import logging

import numpy as np
import pandas as pd
import pytest

from tools.evaluation import (
    SweepAxis,
    ckp_rmse,
    fit_to_sensor,
    sweep_grid_length,
    sweep_surface_area,
)
from tools.grid import generate_ckp_grid
from utils.errors import InvalidSpec

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler()]
)
logger = logging.getLogger(__name__)

CENTER = (2.35, 48.85)


def combined(rmse):
    return np.hypot(rmse.row_rmse, rmse.col_rmse)


def test_ckp_rmse_of_model_against_itself(rpc, small_spec):
    rmse = ckp_rmse(rpc, rpc, generate_ckp_grid(small_spec))
    assert rmse.row_rmse == 0.0 and rmse.col_rmse == 0.0
    assert rmse.n_points == 19 * 19 * 9


def test_ckp_rmse_requires_points(rpc):
    with pytest.raises(InvalidSpec):
        ckp_rmse(rpc, rpc, np.zeros((0, 3)))


def test_fit_to_sensor_records_ckp_rmse(pinhole, small_spec):
    _, report, rmse = fit_to_sensor(pinhole, small_spec)
    assert report.final_ckp_rmse == (rmse.row_rmse, rmse.col_rmse)
    assert rmse.n_points == 19 * 19 * 9


def test_grid_length_sweep_records_failed_sample(pinhole, bounds):
    """Test that an undersized grid is reported in the sample instead of aborting the sweep."""
    logger.info("Testing sweep with an undersized grid...")
    result = sweep_grid_length(pinhole, bounds, [2, 5], n_alt=5)
    assert result.axis == SweepAxis.GRID_LENGTH
    assert [s.param for s in result.samples] == [2.0, 5.0]
    assert result.samples[0].error == "TooFewPoints"
    assert result.samples[0].rmse is None
    assert result.samples[1].error is None
    assert result.samples[1].n_cnp == 5 * 5 * 5
    assert max(result.samples[1].rmse.row_rmse, result.samples[1].rmse.col_rmse) < 1e-4


def test_sweep_threads_keep_order_and_notify(pinhole, bounds):
    calls = []
    serial = sweep_grid_length(pinhole, bounds, [4, 5, 6], n_alt=4)
    threaded = sweep_grid_length(pinhole, bounds, [4, 5, 6], n_alt=4, threads=2, on_sample=lambda r: calls.append(len(r.samples)))
    assert calls == [1, 2, 3]
    assert [s.param for s in threaded.samples] == [4.0, 5.0, 6.0]
    assert threaded.to_json() == serial.to_json()


def test_grid_length_sweep_validation(pinhole, bounds):
    with pytest.raises(InvalidSpec):
        sweep_grid_length(pinhole, bounds, [5, 5], n_alt=4)
    with pytest.raises(InvalidSpec):
        sweep_grid_length(pinhole, bounds, [1, 5], n_alt=4)
    with pytest.raises(InvalidSpec):
        sweep_grid_length(pinhole, bounds, [], n_alt=4)


def test_surface_area_sweep_validation(pinhole):
    with pytest.raises(InvalidSpec):
        sweep_surface_area(pinhole, CENTER, [0.1, 0.05], (0.0, 500.0))
    with pytest.raises(InvalidSpec):
        sweep_surface_area(pinhole, CENTER, [0.0, 0.05], (0.0, 500.0))


def test_surface_area_sweep_outputs(pinhole):
    result = sweep_surface_area(pinhole, CENTER, [0.02, 0.05], (0.0, 500.0), n_lonlat=8, n_alt=4)
    document = json.loads(result.to_json())
    assert document["axis"] == "surface_area"
    assert [s["param"] for s in document["samples"]] == [0.02, 0.05]

    table = pd.read_csv(io.StringIO(result.to_csv()))
    assert list(table.columns) == ["param", "row_rmse", "col_rmse", "chosen_h", "iterations"]
    assert len(table) == 2
    assert np.all(table["iterations"] >= 1)
    assert result.to_json() == sweep_surface_area(pinhole, CENTER, [0.02, 0.05], (0.0, 500.0), n_lonlat=8, n_alt=4).to_json()


def test_failed_sample_csv_row_is_nan(pinhole, bounds):
    result = sweep_grid_length(pinhole, bounds, [2], n_alt=5)
    row = result.samples[0].csv_row()
    assert row["param"] == 2.0
    assert np.isnan(row["row_rmse"]) and np.isnan(row["iterations"])


@pytest.mark.slow
def test_grid_length_plateau(pushbroom, bounds):
    """Test that the check point error stops improving once the grid is dense enough."""
    logger.info("Testing grid-length plateau...")
    result = sweep_grid_length(pushbroom, bounds, [5, 10, 20, 40], n_alt=10)
    errors = [combined(s.rmse) for s in result.samples]
    logger.info(f"Grid-length errors: {errors}")
    assert all(s.error is None for s in result.samples)
    assert errors[1] <= 10.0 * errors[3] + 1e-9
    assert errors[3] >= errors[2] / 2.0


@pytest.mark.slow
def test_surface_area_growth(pushbroom):
    """Test that the error of the jittered scanner grows with the footprint."""
    logger.info("Testing surface-area growth...")
    result = sweep_surface_area(pushbroom, CENTER, [0.02, 0.05, 0.1, 0.3], (0.0, 500.0))
    errors = [combined(s.rmse) for s in result.samples]
    logger.info(f"Surface-area errors: {errors}")
    assert all(s.error is None for s in result.samples)
    assert errors[-1] >= errors[0]


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
