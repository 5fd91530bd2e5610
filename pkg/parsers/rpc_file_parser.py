"""
RPC file parser module for the RPC fitter.
This module reads and writes RPC models in the `KEY: value` text format.
"""

import logging
import os
import re
import tempfile
from typing import Dict

import numpy as np

from tools.rpc_model import N_COEFFS, NormalizationParams, RpcModel
from utils.errors import MissingKey, ParseError

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler()]
)
logger = logging.getLogger(__name__)

# (file key, NormalizationParams field, unit)
NORMALIZATION_KEYS = [
    ("LINE_OFF", "row_offset", "pixels"),
    ("SAMP_OFF", "col_offset", "pixels"),
    ("LAT_OFF", "lat_offset", "degrees"),
    ("LONG_OFF", "lon_offset", "degrees"),
    ("HEIGHT_OFF", "alt_offset", "meters"),
    ("LINE_SCALE", "row_scale", "pixels"),
    ("SAMP_SCALE", "col_scale", "pixels"),
    ("LAT_SCALE", "lat_scale", "degrees"),
    ("LONG_SCALE", "lon_scale", "degrees"),
    ("HEIGHT_SCALE", "alt_scale", "meters"),
]

COEFFICIENT_KEYS = [
    ("LINE_NUM_COEFF", "num_row"),
    ("LINE_DEN_COEFF", "den_row"),
    ("SAMP_NUM_COEFF", "num_col"),
    ("SAMP_DEN_COEFF", "den_col"),
]

_LINE_PATTERN = re.compile(r"^\s*([A-Z_]+(?:_\d+)?)\s*:\s*(\S+)(?:\s+[A-Za-z]+)?\s*$")


def format_float(value: float) -> str:
    """Serialize a float with 17 significant digits."""
    return f"{float(value):.17g}"


def parse_rpc_text(text: str) -> RpcModel:
    """
    Parse RPC text content into a model.

    Args:
        text: File content

    Returns:
        RpcModel
    """
    values: Dict[str, float] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        match = _LINE_PATTERN.match(line)
        if not match:
            raise ParseError(lineno, f"expected 'KEY: value', got {line.strip()!r}")
        key, raw = match.groups()
        try:
            value = float(raw)
        except ValueError:
            raise ParseError(lineno, f"invalid number {raw!r} for {key}")
        if not np.isfinite(value):
            raise ParseError(lineno, f"non-finite value for {key}")
        if key in values:
            raise ParseError(lineno, f"duplicate key {key}")
        values[key] = value

    norm_fields = {}
    for key, name, _ in NORMALIZATION_KEYS:
        if key not in values:
            raise MissingKey(key)
        norm_fields[name] = values[key]

    coeffs = {}
    for prefix, name in COEFFICIENT_KEYS:
        series = []
        for i in range(1, N_COEFFS + 1):
            key = f"{prefix}_{i}"
            if key not in values:
                raise MissingKey(key)
            series.append(values[key])
        coeffs[name] = np.array(series)

    # the model requires unit denominator constants; rescale each fraction when the file does not
    for num, den in (("num_row", "den_row"), ("num_col", "den_col")):
        d0 = coeffs[den][0]
        if d0 == 0.0:
            raise ParseError(0, f"{den} constant term is zero")
        if d0 != 1.0:
            logger.warning(f"Rescaling {num}/{den} so the denominator constant is 1 (was {d0!r})")
            coeffs[num] = coeffs[num] / d0
            coeffs[den] = coeffs[den] / d0
            coeffs[den][0] = 1.0

    return RpcModel(norm=NormalizationParams(**norm_fields), **coeffs)


def read_rpc_file(path: str) -> RpcModel:
    """
    Read an RPC model from a text file.

    Args:
        path: File path

    Returns:
        RpcModel
    """
    logger.info(f"Reading RPC file: {path}")
    with open(path, "r") as f:
        return parse_rpc_text(f.read())


def rpc_to_text(m: RpcModel) -> str:
    """
    Serialize an RPC model to the text format.

    Args:
        m: RPC model

    Returns:
        File content
    """
    lines = []
    for key, name, unit in NORMALIZATION_KEYS:
        lines.append(f"{key}: {format_float(getattr(m.norm, name))} {unit}")
    for prefix, name in COEFFICIENT_KEYS:
        for i, value in enumerate(getattr(m, name), start=1):
            lines.append(f"{prefix}_{i}: {format_float(value)}")
    return "\n".join(lines) + "\n"


def write_text_atomic(path: str, content: str):
    """
    Write a text file through a temporary sibling so that failures leave no partial output.
    """
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp_", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as f:
            f.write(content)
        os.replace(tmp_path, path)
    except Exception:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def write_rpc_file(m: RpcModel, path: str):
    """
    Write an RPC model to a text file.

    Args:
        m: RPC model
        path: Output path
    """
    logger.info(f"Writing RPC file: {path}")
    write_text_atomic(path, rpc_to_text(m))
