"""
Fit agent module for the RPC fitter.
This module handles the fit and evaluate workflows: load a sensor or correspondences, fit an RPC model,
evaluate it on check points and write the outputs.
"""

import json
import logging
from typing import Any, Dict, Optional, Sequence

from parsers.csv_parser import read_correspondences_csv
from parsers.rpc_file_parser import read_rpc_file, write_rpc_file, write_text_atomic
from parsers.sensor_config_parser import bounds_from_normalization, load_sensor
from tools.evaluation import ckp_rmse
from tools.fit import fit_rpc
from tools.grid import GeolocationModel, GridBounds, GridSpec, build_correspondences, generate_ckp_grid, generate_cnp_grid
from tools.rpc_model import RpcModel
from tools.sensors import CorrectedRpcSensor
from utils.config import FitterConfig
from utils.errors import ConfigurationError, RpcFitError, error_response

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler()]
)
logger = logging.getLogger(__name__)


def resolve_bounds(sensor: GeolocationModel, bounds: Optional[Sequence[float]] = None) -> GridBounds:
    """
    Grid bounds for a sensor: explicit values first, then the sensor's declared bounds, then the
    normalization domain of an RPC model.

    Args:
        sensor: Geolocation model
        bounds: Optional lon_min lon_max lat_min lat_max alt_min alt_max

    Returns:
        GridBounds
    """
    if bounds is not None:
        keys = ("lon_min", "lon_max", "lat_min", "lat_max", "alt_min", "alt_max")
        return GridBounds(**dict(zip(keys, bounds)))
    if getattr(sensor, "bounds", None) is not None:
        return sensor.bounds
    if isinstance(sensor, RpcModel):
        return bounds_from_normalization(sensor.norm)
    if isinstance(sensor, CorrectedRpcSensor) and isinstance(sensor.base, RpcModel):
        return bounds_from_normalization(sensor.base.norm)
    raise ConfigurationError(f"{type(sensor).__name__} declares no bounds; pass --bounds")


class FitAgent:
    """
    Handles RPC fitting and evaluation.
    """

    def __init__(self, config: FitterConfig):
        """
        Initialize the fit agent.

        Args:
            config: Fitter configuration
        """
        self.config = config
        logger.debug("Fit agent initialized")

    def _grid_spec(self, sensor: GeolocationModel, parameters: Dict[str, Any]) -> GridSpec:
        return GridSpec(
            bounds=resolve_bounds(sensor, parameters.get("bounds")),
            n_lonlat=int(self.config.get("n_lonlat")),
            n_alt=int(self.config.get("n_alt")),
        )

    def fit(self, parameters: Dict[str, Any]) -> Dict[str, Any]:
        """
        Fit an RPC model from a sensor configuration (on a CNP grid) or from a correspondence CSV.

        Args:
            parameters: sensor | correspondences, bounds, out_rpc, out_report

        Returns:
            Dictionary containing the response
        """
        try:
            cfg = self.config.fit_config()
            threads = cfg.threads
            check_data = None
            if parameters.get("sensor"):
                sensor = load_sensor(parameters["sensor"])
                spec = self._grid_spec(sensor, parameters)
                logger.info(f"Fitting {type(sensor).__name__} on a {spec.n_lonlat}x{spec.n_lonlat}x{spec.n_alt} grid")
                data = build_correspondences(sensor, generate_cnp_grid(spec), threads)
                check_data = build_correspondences(sensor, generate_ckp_grid(spec), threads)
            else:
                data = read_correspondences_csv(parameters["correspondences"])
                logger.info(f"Fitting {len(data)} correspondences")

            model, report = fit_rpc(data, cfg, check_data)

            out_rpc = parameters["out_rpc"]
            out_report = parameters.get("out_report") or f"{out_rpc}.report.json"
            write_rpc_file(model, out_rpc)
            write_text_atomic(out_report, report.to_json(include_lcurve=bool(parameters.get("lcurve"))) + "\n")

            return {
                "status": "success",
                "message": f"RPC model written to {out_rpc}",
                "out_rpc": out_rpc,
                "out_report": out_report,
                "chosen_h": report.chosen_h,
                "final_cnp_rmse": report.final_cnp_rmse,
                "final_ckp_rmse": report.final_ckp_rmse,
                "warnings": report.warnings,
            }
        except (RpcFitError, OSError) as e:
            logger.error(f"Error fitting RPC model: {str(e)}")
            return error_response(e, "Failed to fit RPC model")

    def evaluate(self, parameters: Dict[str, Any]) -> Dict[str, Any]:
        """
        Check point RMSE of an RPC file against a reference sensor.

        Args:
            parameters: rpc, sensor, bounds, out

        Returns:
            Dictionary containing the response
        """
        try:
            model = read_rpc_file(parameters["rpc"])
            sensor = load_sensor(parameters["sensor"])
            spec = self._grid_spec(sensor, parameters)
            rmse = ckp_rmse(model, sensor, generate_ckp_grid(spec), int(self.config.get("threads")))
            result = {
                "row_rmse": rmse.row_rmse,
                "col_rmse": rmse.col_rmse,
                "n_points": rmse.n_points,
                "grid": spec.model_dump(),
            }
            write_text_atomic(parameters["out"], json.dumps(result, indent=2, sort_keys=True) + "\n")
            logger.info(f"CKP RMSE row={rmse.row_rmse:.6e} col={rmse.col_rmse:.6e} px over {rmse.n_points} points")
            return {"status": "success", "message": "Evaluation completed", **result}
        except (RpcFitError, OSError) as e:
            logger.error(f"Error evaluating RPC model: {str(e)}")
            return error_response(e, "Failed to evaluate RPC model")
