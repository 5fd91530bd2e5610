"""
CSV parser module for the RPC fitter.
This module reads and writes the point, pixel and correspondence CSV files used by the command line.
"""

import io
import logging
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from parsers.rpc_file_parser import write_text_atomic
from tools.grid import MIN_FIT_POINTS, CorrespondenceSet
from utils.errors import ParseError, TooFewPoints

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler()]
)
logger = logging.getLogger(__name__)

POINT_COLUMNS = ["lon", "lat", "alt"]
PIXEL_COLUMNS = ["row", "col", "alt"]
CORRESPONDENCE_COLUMNS = ["lon", "lat", "alt", "row", "col"]

FLOAT_FORMAT = "%.17g"


def _to_float(value) -> float:
    # float() parses the 17 significant digits written by table_to_text exactly
    try:
        return float(value)
    except (TypeError, ValueError):
        return float("nan")


def read_table(text: str, columns: List[str]) -> Tuple[pd.DataFrame, np.ndarray]:
    """
    Parse CSV content with the expected header.

    Args:
        text: File content
        columns: Required column names

    Returns:
        Tuple of (numeric DataFrame with the required columns, boolean mask of malformed rows)
    """
    if not text.strip():
        return pd.DataFrame(columns=columns, dtype=float), np.zeros(0, dtype=bool)
    n_fields = len(text.lstrip().splitlines()[0].split(","))
    try:
        # rows with extra fields become all-NaN so that row order is kept
        frame = pd.read_csv(
            io.StringIO(text),
            dtype=str,
            skipinitialspace=True,
            engine="python",
            on_bad_lines=lambda fields: ["nan"] * n_fields,
        )
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ParseError(1, f"unreadable CSV: {str(e)}")

    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ParseError(1, f"missing column(s) {', '.join(missing)}; expected header {','.join(columns)}")

    numeric = frame[columns].apply(lambda column: column.map(_to_float)).astype(float)
    malformed = ~np.isfinite(numeric.to_numpy()).all(axis=1)
    for index in np.flatnonzero(malformed):
        # header is line 1
        logger.warning(f"Malformed CSV row at line {index + 2}; it will produce NaN output")
    return numeric.reset_index(drop=True), malformed


def read_table_file(path: str, columns: List[str]) -> Tuple[pd.DataFrame, np.ndarray]:
    logger.info(f"Reading CSV file: {path}")
    with open(path, "r") as f:
        return read_table(f.read(), columns)


def table_to_text(columns: Dict[str, np.ndarray]) -> str:
    """Serialize named columns to CSV with 17 significant digits."""
    buffer = io.StringIO()
    pd.DataFrame(columns).to_csv(buffer, index=False, float_format=FLOAT_FORMAT, na_rep="nan", lineterminator="\n")
    return buffer.getvalue()


def write_table_file(path: str, columns: Dict[str, np.ndarray]):
    logger.info(f"Writing CSV file: {path}")
    write_text_atomic(path, table_to_text(columns))


def read_correspondences_csv(path: str) -> CorrespondenceSet:
    """
    Read a correspondence set; malformed rows are not allowed here since they would corrupt a fit.

    Args:
        path: CSV path with header lon,lat,alt,row,col

    Returns:
        CorrespondenceSet normalized on its extents
    """
    frame, malformed = read_table_file(path, CORRESPONDENCE_COLUMNS)
    if np.any(malformed):
        raise ParseError(int(np.argmax(malformed)) + 2, "malformed correspondence row")
    if len(frame) < MIN_FIT_POINTS:
        raise TooFewPoints(len(frame), MIN_FIT_POINTS)
    data = CorrespondenceSet.from_arrays(*(frame[c].to_numpy() for c in CORRESPONDENCE_COLUMNS))
    for message in data.warnings:
        logger.warning(f"Correspondence normalization: {message}")
    return data


def write_correspondences_csv(data: CorrespondenceSet, path: str):
    """
    Write a correspondence set with header lon,lat,alt,row,col.
    """
    write_table_file(path, {c: getattr(data, c) for c in CORRESPONDENCE_COLUMNS})
