"""
Sensor configuration parser module for the RPC fitter.
This module loads sensor and sweep JSON configurations, validates them against the JSON schemas and
builds the corresponding geolocation models.
"""

import json
import logging
import os
from typing import Any, Dict, Optional

import numpy as np
from jsonschema import ValidationError, validate
from scipy.spatial.transform import Rotation

from parsers.rpc_file_parser import read_rpc_file, write_text_atomic
from tools.grid import GeolocationModel, GridBounds
from tools.rpc_model import NormalizationParams, RpcModel
from tools.sensors import (
    CorrectedRpcSensor,
    LocalTangentPlane,
    PinholeSensor,
    PushbroomSensor,
    estimate_camera_center,
)
from utils.errors import ConfigurationError, ParseError, RpcFitError

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler()]
)
logger = logging.getLogger(__name__)

SCHEMA_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), "schemas")


def load_schema(name: str, schema_dir: str = SCHEMA_DIR) -> Dict[str, Any]:
    """
    Load a JSON schema by name.

    Args:
        name: Schema name without the `_schema.json` suffix (e.g. "sensor_config")
        schema_dir: Directory holding the schemas

    Returns:
        JSON schema dictionary
    """
    path = os.path.join(schema_dir, f"{name}_schema.json")
    with open(path, "r") as f:
        return json.load(f)


def validate_document(document: Dict[str, Any], schema_name: str) -> Dict[str, Any]:
    """
    Validate a configuration document against one of the schemas.

    Returns:
        The document itself
    """
    try:
        validate(instance=document, schema=load_schema(schema_name))
        return document
    except ValidationError as e:
        location = "/".join(str(p) for p in e.absolute_path) or "<root>"
        logger.error(f"{schema_name} validation failed at {location}: {e.message}")
        raise ConfigurationError(f"invalid {schema_name} at {location}: {e.message}")


def read_json_file(path: str) -> Dict[str, Any]:
    """Read a JSON file, mapping syntax errors to ParseError."""
    logger.info(f"Reading JSON file: {path}")
    with open(path, "r") as f:
        text = f.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.lineno, e.msg)


def _bounds(config: Dict[str, Any]) -> Optional[GridBounds]:
    return GridBounds(**config["bounds"]) if "bounds" in config else None


def _frame(config: Dict[str, Any]) -> Optional[LocalTangentPlane]:
    return LocalTangentPlane(**config["frame"]) if "frame" in config else None


def _rotation(config: Dict[str, Any]) -> np.ndarray:
    if "R" in config:
        return np.array(config["R"], dtype=float)
    return Rotation.from_rotvec(config["rotation"]).as_matrix()


def bounds_from_normalization(norm: NormalizationParams) -> GridBounds:
    """Ground box covered by the normalization domain [-1, 1]^3."""
    return GridBounds(
        lon_min=norm.lon_offset - norm.lon_scale, lon_max=norm.lon_offset + norm.lon_scale,
        lat_min=norm.lat_offset - norm.lat_scale, lat_max=norm.lat_offset + norm.lat_scale,
        alt_min=norm.alt_offset - norm.alt_scale, alt_max=norm.alt_offset + norm.alt_scale,
    )


def rpc_from_dict(model: Dict[str, Any]) -> RpcModel:
    return RpcModel(
        num_row=model["num_row"],
        den_row=model["den_row"],
        num_col=model["num_col"],
        den_col=model["den_col"],
        norm=NormalizationParams(**model["norm"]),
    )


def _build(config: Dict[str, Any], base_dir: str) -> GeolocationModel:
    kind = config["type"]
    if kind == "rpc":
        if "model" in config:
            return rpc_from_dict(config["model"])
        return read_rpc_file(os.path.join(base_dir, config["path"]))

    if kind == "pinhole":
        frame = _frame(config)
        if "P" in config:
            return PinholeSensor(P=np.array(config["P"], dtype=float), frame=frame, bounds=_bounds(config))
        rotation = Rotation.from_rotvec(config["rotation"]).as_matrix() if "rotation" in config else None
        return PinholeSensor.looking_down(
            frame=frame,
            center=config["center"],
            focal=config["focal"],
            principal_point=tuple(config.get("principal_point", (0.0, 0.0))),
            rotation=rotation,
            bounds=_bounds(config),
        )

    if kind == "pushbroom":
        return PushbroomSensor(
            frame=_frame(config),
            position=config["position"],
            velocity=config["velocity"],
            line_period=config["line_period"],
            focal_ratio=config["focal_ratio"],
            attitude=config.get("attitude", [0.0, 0.0, 0.0]),
            col_offset=config.get("col_offset", 0.0),
            jitter_amplitude=config.get("jitter_amplitude", 0.0),
            jitter_period=config.get("jitter_period", 1.0),
            n_lines=config.get("n_lines"),
            bounds=_bounds(config),
        )

    # corrected_rpc
    base = _build(config["base"], base_dir)
    frame = _frame(config)
    if "center" in config:
        center = np.array(config["center"], dtype=float)
    else:
        if not isinstance(base, RpcModel):
            raise ConfigurationError("corrected_rpc needs an explicit center unless its base is an RPC model")
        center = estimate_camera_center(base, bounds_from_normalization(base.norm))
        logger.info(f"Estimated rotation center for corrected RPC: {center}")
    return CorrectedRpcSensor(base=base, R=_rotation(config), T=config["translation"], C=center, frame=frame)


def sensor_from_config(config: Dict[str, Any], base_dir: str = ".") -> GeolocationModel:
    """
    Build a geolocation model from a sensor configuration dictionary.

    Args:
        config: Sensor configuration (see schemas/sensor_config_schema.json)
        base_dir: Directory against which relative paths are resolved

    Returns:
        Geolocation model
    """
    validate_document(config, "sensor_config")
    try:
        sensor = _build(config, base_dir)
    except RpcFitError:
        raise
    except (ValueError, TypeError, KeyError) as e:
        raise ConfigurationError(f"invalid {config.get('type')} sensor: {str(e)}")
    logger.info(f"Built {type(sensor).__name__} from configuration")
    return sensor


def load_sensor(path: str) -> GeolocationModel:
    """
    Load a sensor configuration file.

    Args:
        path: JSON file path

    Returns:
        Geolocation model
    """
    return sensor_from_config(read_json_file(path), os.path.dirname(os.path.abspath(path)))


def _frame_dict(frame: LocalTangentPlane) -> Dict[str, float]:
    return {"lon0": float(frame.lon0), "lat0": float(frame.lat0), "alt0": float(frame.alt0)}


def sensor_to_config(sensor: GeolocationModel) -> Dict[str, Any]:
    """
    Serialize a geolocation model into a sensor configuration dictionary.

    Args:
        sensor: RpcModel, PinholeSensor, PushbroomSensor or CorrectedRpcSensor

    Returns:
        Configuration accepted by sensor_from_config
    """
    if isinstance(sensor, RpcModel):
        config = {"type": "rpc", "model": sensor.to_dict()}
    elif isinstance(sensor, PinholeSensor):
        config = {"type": "pinhole", "P": sensor.P.tolist(), "frame": _frame_dict(sensor.frame)}
    elif isinstance(sensor, PushbroomSensor):
        config = {
            "type": "pushbroom",
            "frame": _frame_dict(sensor.frame),
            "position": sensor.position.tolist(),
            "velocity": sensor.velocity.tolist(),
            "line_period": float(sensor.line_period),
            "focal_ratio": float(sensor.focal_ratio),
            "attitude": sensor.attitude.tolist(),
            "col_offset": float(sensor.col_offset),
            "jitter_amplitude": float(sensor.jitter_amplitude),
            "jitter_period": float(sensor.jitter_period),
        }
        if sensor.n_lines is not None:
            config["n_lines"] = int(sensor.n_lines)
    elif isinstance(sensor, CorrectedRpcSensor):
        config = {
            "type": "corrected_rpc",
            "base": sensor_to_config(sensor.base),
            "R": sensor.R.tolist(),
            "translation": sensor.T.tolist(),
            "center": sensor.C.tolist(),
            "frame": _frame_dict(sensor.frame),
        }
    else:
        raise ConfigurationError(f"cannot serialize sensor of type {type(sensor).__name__}")

    bounds = getattr(sensor, "bounds", None)
    if bounds is not None:
        config["bounds"] = bounds.model_dump()
    return config


def write_sensor_config(sensor: GeolocationModel, path: str):
    """Write a sensor configuration file."""
    logger.info(f"Writing sensor configuration: {path}")
    write_text_atomic(path, json.dumps(sensor_to_config(sensor), indent=2, sort_keys=True) + "\n")


def load_sweep_config(path: str) -> Dict[str, Any]:
    """
    Load and validate a sweep configuration file; the sensor path is resolved against the file's directory.

    Returns:
        Validated configuration dictionary
    """
    config = validate_document(read_json_file(path), "sweep_config")
    if "sensor" in config:
        config["sensor"] = os.path.join(os.path.dirname(os.path.abspath(path)), config["sensor"])
    return config
