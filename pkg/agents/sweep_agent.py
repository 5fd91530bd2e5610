"""
Sweep agent module for the RPC fitter.
This module runs the grid-length and surface-area sweeps and writes their results after every sample.
"""

import logging
from typing import Any, Dict

from agents.fit_agent import resolve_bounds
from parsers.rpc_file_parser import write_text_atomic
from parsers.sensor_config_parser import load_sensor, load_sweep_config
from tools.evaluation import SweepAxis, SweepResult, sweep_grid_length, sweep_surface_area
from utils.config import FitterConfig
from utils.errors import ConfigurationError, RpcFitError, error_response

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler()]
)
logger = logging.getLogger(__name__)

SWEEP_KINDS = [axis.value for axis in SweepAxis]

# parameters that a sweep file may set and a command-line flag may override
SWEEP_KEYS = ("sensor", "bounds", "lengths", "n_alt", "n_lonlat", "center", "half_widths", "alt_range")


class SweepAgent:
    """
    Handles robustness sweeps.
    """

    def __init__(self, config: FitterConfig):
        """
        Initialize the sweep agent.

        Args:
            config: Fitter configuration
        """
        self.config = config
        logger.debug("Sweep agent initialized")

    def _merge(self, parameters: Dict[str, Any]) -> Dict[str, Any]:
        """Sweep file values overridden by flags."""
        merged: Dict[str, Any] = {}
        if parameters.get("config"):
            document = load_sweep_config(parameters["config"])
            merged.update(document)
            if document.get("fit"):
                # fit values from the file sit under the flags already applied to the configuration
                flags = {k: v for k, v in (parameters.get("fit_overrides") or {}).items() if v is not None}
                self.config = FitterConfig(file_values=document["fit"], config_override=flags)
        for key in SWEEP_KEYS + ("kind",):
            if parameters.get(key) is not None:
                merged[key] = parameters[key]
        if merged.get("kind") not in SWEEP_KINDS:
            raise ConfigurationError(f"unknown sweep kind {merged.get('kind')!r}; expected one of {', '.join(SWEEP_KINDS)}")
        if not merged.get("sensor"):
            raise ConfigurationError("no sensor given for the sweep")
        return merged

    def _writer(self, parameters: Dict[str, Any]):
        out_json = parameters["out"]
        out_csv = parameters.get("out_csv")

        def flush(result: SweepResult):
            write_text_atomic(out_json, result.to_json() + "\n")
            if out_csv:
                write_text_atomic(out_csv, result.to_csv())
            logger.debug(f"Flushed {len(result.samples)} sweep sample(s)")

        return flush

    def sweep(self, parameters: Dict[str, Any]) -> Dict[str, Any]:
        """
        Run a sweep.

        Args:
            parameters: kind, sensor, config, sweep values (lengths, bounds, n_alt or center, half_widths,
                alt_range, n_lonlat), out, out_csv

        Returns:
            Dictionary containing the response
        """
        try:
            merged = self._merge(parameters)
            sensor = load_sensor(merged["sensor"])
            cfg = self.config.fit_config()
            threads = int(self.config.get("threads"))
            # samples run in parallel; each fit stays single-threaded
            cfg = cfg.model_copy(update={"threads": 1}) if threads > 1 else cfg
            n_alt = int(merged.get("n_alt", self.config.get("n_alt")))
            flush = self._writer(parameters)

            logger.info(f"Running {merged['kind']} sweep on {type(sensor).__name__}")
            if merged["kind"] == SweepAxis.GRID_LENGTH.value:
                if "lengths" not in merged:
                    raise ConfigurationError("grid_length sweep needs lengths")
                bounds = resolve_bounds(sensor, _bounds_list(merged.get("bounds")))
                result = sweep_grid_length(sensor, bounds, merged["lengths"], n_alt, cfg, threads, flush)
            else:
                missing = [k for k in ("center", "half_widths", "alt_range") if k not in merged]
                if missing:
                    raise ConfigurationError(f"surface_area sweep needs {', '.join(missing)}")
                result = sweep_surface_area(
                    sensor,
                    tuple(merged["center"]),
                    merged["half_widths"],
                    tuple(merged["alt_range"]),
                    cfg,
                    threads,
                    flush,
                    n_lonlat=int(merged.get("n_lonlat", self.config.get("n_lonlat"))),
                    n_alt=n_alt,
                )

            failed = [s for s in result.samples if s.error]
            return {
                "status": "success",
                "message": f"{len(result.samples) - len(failed)} of {len(result.samples)} sample(s) fitted",
                "samples": len(result.samples),
                "failed_samples": len(failed),
                "out": parameters["out"],
                "out_csv": parameters.get("out_csv"),
            }
        except (RpcFitError, OSError) as e:
            logger.error(f"Error running sweep: {str(e)}")
            return error_response(e, "Failed to run sweep")


def _bounds_list(bounds):
    """Accept bounds as a six-element list or as a dictionary of GridBounds fields."""
    if bounds is None or isinstance(bounds, (list, tuple)):
        return bounds
    keys = ("lon_min", "lon_max", "lat_min", "lat_max", "alt_min", "alt_max")
    try:
        return [bounds[k] for k in keys]
    except KeyError as e:
        raise ConfigurationError(f"sweep bounds missing {str(e)}")
