"""
Configuration validator module for the RPC fitter.
This module validates command parameters and paths before any computation starts.
"""

import logging
import os
from typing import Dict, Any, List

from utils.errors import ConfigurationError

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler()]
)
logger = logging.getLogger(__name__)

# (input path parameters, output path parameters) per command
COMMAND_PATHS = {
    "fit": (["sensor", "correspondences"], ["out_rpc", "out_report"]),
    "project": (["rpc", "points"], ["out"]),
    "localize": (["rpc", "pixels"], ["out"]),
    "evaluate": (["rpc", "sensor"], ["out"]),
    "sweep": (["sensor", "config"], ["out", "out_csv"]),
}

POSITIVE_INTEGERS = {"n_lonlat": 2, "n_alt": 2, "threads": 1, "max_wls_iterations": 1, "max_iccv_iterations": 1, "lcurve_samples": 3}
POSITIVE_FLOATS = ["rmse_tolerance", "denominator_floor"]


class ConfigurationValidator:
    """
    Validates command parameters before execution.
    """

    def __init__(self, config: Dict[str, Any]):
        """
        Initialize the configuration validator.

        Args:
            config: Configuration dictionary
        """
        self.config = config

    def validate_command(self, command: str, parameters: Dict[str, Any]) -> Dict[str, Any]:
        """
        Validate the parameters of a command.

        Args:
            command: Subcommand name (fit, project, localize, evaluate, sweep)
            parameters: Command parameters

        Returns:
            Dictionary containing validation results
        """
        logger.debug(f"Validating {command} parameters")
        if command not in COMMAND_PATHS:
            return {
                "status": "invalid",
                "message": f"Unknown command: {command}",
                "errors": [f"unknown command {command!r}"],
                "missing_inputs": [],
                "warnings": [],
            }

        basic = self._basic_validation(command, parameters)
        paths = self._path_validation(command, parameters)
        errors = basic["errors"] + paths["errors"]
        return {
            "status": "valid" if not errors and not paths["missing_inputs"] else "invalid",
            "message": "Configuration validation completed",
            "errors": errors,
            "missing_inputs": paths["missing_inputs"],
            "warnings": basic["warnings"] + paths["warnings"],
        }

    def ensure_valid(self, command: str, parameters: Dict[str, Any]):
        """
        Validate and raise on the first problem: missing inputs as FileNotFoundError, anything else as ConfigurationError.
        """
        result = self.validate_command(command, parameters)
        for warning in result["warnings"]:
            logger.warning(warning)
        if result["missing_inputs"]:
            raise FileNotFoundError(f"input file not found: {result['missing_inputs'][0]}")
        if result["errors"]:
            raise ConfigurationError("; ".join(result["errors"]))

    def _basic_validation(self, command: str, parameters: Dict[str, Any]) -> Dict[str, Any]:
        """
        Check required parameters and numeric ranges.

        Args:
            command: Subcommand name
            parameters: Command parameters

        Returns:
            Dictionary containing validation results
        """
        errors = []
        warnings = []

        if command == "fit":
            sources = [p for p in ("sensor", "correspondences") if parameters.get(p)]
            if len(sources) != 1:
                errors.append("exactly one of --sensor or --correspondences is required")
            if parameters.get("correspondences") and parameters.get("bounds"):
                warnings.append("--bounds is ignored when fitting correspondences from a CSV file")

        if command == "evaluate" and not parameters.get("sensor"):
            errors.append("--sensor is required")

        if command == "sweep":
            if not parameters.get("sensor") and not parameters.get("config"):
                errors.append("a sensor is required, either --sensor or via --config")

        for name, minimum in POSITIVE_INTEGERS.items():
            value = parameters.get(name)
            if value is not None and int(value) < minimum:
                errors.append(f"{name} must be >= {minimum}, got {value}")

        for name in POSITIVE_FLOATS:
            value = parameters.get(name)
            if value is not None and not float(value) > 0:
                errors.append(f"{name} must be positive, got {value}")

        bounds = parameters.get("bounds")
        if bounds is not None:
            if len(bounds) != 6:
                errors.append("--bounds takes lon_min lon_max lat_min lat_max alt_min alt_max")
            elif not (bounds[0] < bounds[1] and bounds[2] < bounds[3] and bounds[4] <= bounds[5]):
                errors.append(f"--bounds must be increasing pairs, got {bounds}")

        return {
            "valid": len(errors) == 0,
            "errors": errors,
            "warnings": warnings,
        }

    def _path_validation(self, command: str, parameters: Dict[str, Any]) -> Dict[str, Any]:
        """
        Check that inputs exist and that outputs go to writable directories without overwriting an input.

        Args:
            command: Subcommand name
            parameters: Command parameters

        Returns:
            Dictionary containing validation results
        """
        inputs, outputs = COMMAND_PATHS[command]
        errors: List[str] = []
        warnings: List[str] = []
        missing: List[str] = []

        input_paths = []
        for name in inputs:
            path = parameters.get(name)
            if not path:
                continue
            if not os.path.isfile(path):
                missing.append(path)
            input_paths.append(os.path.realpath(path))

        for name in outputs:
            path = parameters.get(name)
            if not path:
                if name in ("out_rpc", "out"):
                    errors.append(f"output path --{name.replace('_', '-')} is required")
                continue
            directory = os.path.dirname(os.path.abspath(path))
            if not os.path.isdir(directory):
                errors.append(f"output directory does not exist: {directory}")
            elif not os.access(directory, os.W_OK):
                errors.append(f"output directory is not writable: {directory}")
            if os.path.realpath(path) in input_paths:
                errors.append(f"output {path} would overwrite an input file")
            elif os.path.exists(path):
                warnings.append(f"output {path} exists and will be replaced")

        return {
            "errors": errors,
            "missing_inputs": missing,
            "warnings": warnings,
        }
