"""
Projection agent module for the RPC fitter.
This module handles projecting point files and localizing pixel files through an RPC model.
"""

import logging
from typing import Any, Dict

import numpy as np

from parsers.csv_parser import PIXEL_COLUMNS, POINT_COLUMNS, read_table_file, write_table_file
from parsers.rpc_file_parser import read_rpc_file
from tools.rpc_model import RpcModel, localize_many
from utils.config import FitterConfig
from utils.errors import RpcFitError, error_response

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler()]
)
logger = logging.getLogger(__name__)


def project_rows(model: RpcModel, lon: np.ndarray, lat: np.ndarray, alt: np.ndarray, valid: np.ndarray):
    """
    Project the valid rows; rows that are invalid or fail to project come back as NaN.

    Returns:
        Tuple of (row, col, number of failed valid rows)
    """
    row = np.full(len(lon), np.nan)
    col = np.full(len(lon), np.nan)
    idx = np.flatnonzero(valid)
    if len(idx) == 0:
        return row, col, 0
    try:
        row[idx], col[idx] = model.project(lon[idx], lat[idx], alt[idx])
        return row, col, 0
    except RpcFitError:
        pass
    failed = 0
    for i in idx:
        try:
            row[i], col[i] = model.project(lon[i], lat[i], alt[i])
        except RpcFitError as e:
            logger.warning(f"Projection failed for point {i}: {str(e)}")
            failed += 1
    return row, col, failed


class ProjectionAgent:
    """
    Handles project and localize operations over CSV files.
    """

    def __init__(self, config: FitterConfig):
        """
        Initialize the projection agent.

        Args:
            config: Fitter configuration
        """
        self.config = config
        logger.debug("Projection agent initialized")

    def project(self, parameters: Dict[str, Any]) -> Dict[str, Any]:
        """
        Append projected (row, col) columns to a points file.

        Args:
            parameters: rpc, points, out

        Returns:
            Dictionary containing the response
        """
        try:
            model = read_rpc_file(parameters["rpc"])
            frame, malformed = read_table_file(parameters["points"], POINT_COLUMNS)
            lon, lat, alt = (frame[c].to_numpy() for c in POINT_COLUMNS)
            row, col, failed = project_rows(model, lon, lat, alt, ~malformed)
            write_table_file(parameters["out"], {"lon": lon, "lat": lat, "alt": alt, "row": row, "col": col})
            return self._summary("Projected", len(frame), int(np.count_nonzero(malformed)), failed, parameters["out"])
        except (RpcFitError, OSError) as e:
            logger.error(f"Error projecting points: {str(e)}")
            return error_response(e, "Failed to project points")

    def localize(self, parameters: Dict[str, Any]) -> Dict[str, Any]:
        """
        Append localized (lon, lat) columns to a pixels file with an altitude column.

        Args:
            parameters: rpc, pixels, out

        Returns:
            Dictionary containing the response
        """
        try:
            model = read_rpc_file(parameters["rpc"])
            frame, malformed = read_table_file(parameters["pixels"], PIXEL_COLUMNS)
            row, col, alt = (frame[c].to_numpy() for c in PIXEL_COLUMNS)
            lon = np.full(len(frame), np.nan)
            lat = np.full(len(frame), np.nan)
            valid = np.flatnonzero(~malformed)
            if len(valid):
                lon[valid], lat[valid] = localize_many(model, row[valid], col[valid], alt[valid])
            failed = int(np.count_nonzero(np.isnan(lon[valid])))
            write_table_file(parameters["out"], {"row": row, "col": col, "alt": alt, "lon": lon, "lat": lat})
            return self._summary("Localized", len(frame), int(np.count_nonzero(malformed)), failed, parameters["out"])
        except (RpcFitError, OSError) as e:
            logger.error(f"Error localizing pixels: {str(e)}")
            return error_response(e, "Failed to localize pixels")

    def _summary(self, verb: str, total: int, malformed: int, failed: int, out: str) -> Dict[str, Any]:
        warnings = malformed + failed
        if warnings:
            logger.warning(f"{warnings} row(s) written as NaN ({malformed} malformed, {failed} failed)")
        return {
            "status": "success",
            "message": f"{verb} {total - warnings} of {total} row(s) into {out}",
            "rows": total,
            "malformed_rows": malformed,
            "failed_rows": failed,
            "warning_count": warnings,
        }
