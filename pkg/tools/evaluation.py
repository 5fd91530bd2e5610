"""
Evaluation module for the RPC fitter.
This module computes check point RMSE and runs the robustness sweeps (varying grid length, varying surface area).
"""

import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from tools.fit import FitConfig, fit_rpc
from tools.grid import (
    GeolocationModel,
    GridBounds,
    GridSpec,
    build_correspondences,
    generate_ckp_grid,
    generate_cnp_grid,
    project_points,
)
from tools.rpc_model import RpcModel
from utils.errors import InvalidSpec, RpcFitError

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler()]
)
logger = logging.getLogger(__name__)

SURFACE_AREA_GRID_LENGTH = 50
SURFACE_AREA_ALT_LAYERS = 10


@dataclass(frozen=True)
class RmseResult:
    row_rmse: float
    col_rmse: float
    n_points: int

    def to_dict(self) -> Dict[str, Any]:
        return {"row_rmse": self.row_rmse, "col_rmse": self.col_rmse, "n_points": self.n_points}


class SweepAxis(str, Enum):
    SURFACE_AREA = "surface_area"
    GRID_LENGTH = "grid_length"


@dataclass
class SweepSample:
    param: float
    rmse: Optional[RmseResult] = None
    fit_summary: Optional[Dict[str, Any]] = None
    n_cnp: int = 0
    error: Optional[str] = None
    message: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "param": self.param,
            "rmse": None if self.rmse is None else self.rmse.to_dict(),
            "fit_summary": self.fit_summary,
            "n_cnp": self.n_cnp,
            "error": self.error,
            "message": self.message,
        }

    def csv_row(self) -> Dict[str, float]:
        summary = self.fit_summary or {}
        iterations = summary.get("iterations_used")
        return {
            "param": self.param,
            "row_rmse": self.rmse.row_rmse if self.rmse else np.nan,
            "col_rmse": self.rmse.col_rmse if self.rmse else np.nan,
            "chosen_h": summary.get("chosen_h", np.nan),
            "iterations": sum(iterations.values()) if iterations else np.nan,
        }


@dataclass
class SweepResult:
    axis: SweepAxis
    samples: List[SweepSample] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {"axis": self.axis.value, "samples": [s.to_dict() for s in self.samples]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        frame = pd.DataFrame(
            [s.csv_row() for s in self.samples],
            columns=["param", "row_rmse", "col_rmse", "chosen_h", "iterations"],
        )
        buffer = io.StringIO()
        frame.to_csv(buffer, index=False, float_format="%.17g", lineterminator="\n")
        return buffer.getvalue()


def ckp_rmse(fitted: RpcModel, truth: GeolocationModel, ckps: np.ndarray, threads: int = 1) -> RmseResult:
    """
    Per-axis RMSE, in pixels, between a fitted model and the reference model on check points.

    Args:
        fitted: Fitted RPC model
        truth: Reference geolocation model
        ckps: (N, 3) array of lon, lat, alt

    Returns:
        RmseResult
    """
    ckps = np.asarray(ckps, dtype=float).reshape(-1, 3)
    if len(ckps) == 0:
        raise InvalidSpec("no check points")
    row_f, col_f = project_points(fitted, ckps, threads)
    row_t, col_t = project_points(truth, ckps, threads)
    return RmseResult(
        row_rmse=float(np.sqrt(np.mean((row_f - row_t) ** 2))),
        col_rmse=float(np.sqrt(np.mean((col_f - col_t) ** 2))),
        n_points=len(ckps),
    )


def fit_to_sensor(truth: GeolocationModel, spec: GridSpec, cfg: Optional[FitConfig] = None):
    """
    Fit an RPC on the CNP grid of a GridSpec and evaluate it on the matching CKP grid.

    Returns:
        Tuple of (model, FitReport, RmseResult)
    """
    cfg = cfg or FitConfig()
    data = build_correspondences(truth, generate_cnp_grid(spec), cfg.threads)
    model, report = fit_rpc(data, cfg)
    rmse = ckp_rmse(model, truth, generate_ckp_grid(spec), cfg.threads)
    report.final_ckp_rmse = (rmse.row_rmse, rmse.col_rmse)
    return model, report, rmse


def _run_sample(truth: GeolocationModel, param: float, spec_factory: Callable[[], GridSpec], cfg: FitConfig) -> SweepSample:
    sample = SweepSample(param=param)
    try:
        spec = spec_factory()
        sample.n_cnp = spec.n_lonlat ** 2 * spec.n_alt
        _, report, rmse = fit_to_sensor(truth, spec, cfg)
        sample.rmse = rmse
        sample.fit_summary = report.to_dict()
        logger.info(f"Sweep sample {param}: CKP RMSE row={rmse.row_rmse:.3e} col={rmse.col_rmse:.3e} px")
    except RpcFitError as e:
        logger.warning(f"Sweep sample {param} failed: {type(e).__name__}: {str(e)}")
        sample.error = type(e).__name__
        sample.message = str(e)
    return sample


def _run_sweep(
    axis: SweepAxis,
    truth: GeolocationModel,
    jobs: List[Tuple[float, Callable[[], GridSpec]]],
    cfg: FitConfig,
    threads: int,
    on_sample: Optional[Callable[[SweepResult], None]],
) -> SweepResult:
    result = SweepResult(axis=axis)
    run = lambda job: _run_sample(truth, job[0], job[1], cfg)
    if threads <= 1:
        samples = map(run, jobs)
        for sample in samples:
            result.samples.append(sample)
            if on_sample:
                on_sample(result)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for sample in pool.map(run, jobs):
                result.samples.append(sample)
                if on_sample:
                    on_sample(result)
    return result


def _check_increasing(values: Sequence[float], name: str):
    if len(values) == 0:
        raise InvalidSpec(f"{name} must not be empty")
    if any(b <= a for a, b in zip(values[:-1], values[1:])):
        raise InvalidSpec(f"{name} must be strictly increasing")


def sweep_grid_length(
    truth: GeolocationModel,
    bounds: GridBounds,
    lengths: Sequence[int],
    n_alt: int,
    cfg: Optional[FitConfig] = None,
    threads: int = 1,
    on_sample: Optional[Callable[[SweepResult], None]] = None,
) -> SweepResult:
    """
    Fit on n x n x n_alt CNP grids over fixed bounds for each grid length n and evaluate on the CKP grids.

    Args:
        truth: Reference geolocation model
        bounds: Fixed grid bounds
        lengths: Grid lengths, strictly increasing, each >= 2
        n_alt: Elevation layers
        cfg: Fit configuration
        threads: Samples run in parallel; results keep the input order
        on_sample: Called with the partial result after each sample

    Returns:
        SweepResult
    """
    cfg = cfg or FitConfig()
    lengths = [int(n) for n in lengths]
    _check_increasing(lengths, "lengths")
    if min(lengths) < 2:
        raise InvalidSpec("every grid length must be >= 2")
    jobs = [(float(n), lambda n=n: GridSpec(bounds=bounds, n_lonlat=n, n_alt=n_alt)) for n in lengths]
    return _run_sweep(SweepAxis.GRID_LENGTH, truth, jobs, cfg, threads, on_sample)


def sweep_surface_area(
    truth: GeolocationModel,
    center: Tuple[float, float],
    half_widths: Sequence[float],
    alt_range: Tuple[float, float],
    cfg: Optional[FitConfig] = None,
    threads: int = 1,
    on_sample: Optional[Callable[[SweepResult], None]] = None,
    n_lonlat: int = SURFACE_AREA_GRID_LENGTH,
    n_alt: int = SURFACE_AREA_ALT_LAYERS,
) -> SweepResult:
    """
    Fit on square footprints of growing half width around a center, with a fixed CNP grid size.

    Args:
        truth: Reference geolocation model
        center: (lon, lat) of the footprint center
        half_widths: Half widths in degrees, strictly increasing and positive
        alt_range: (alt_min, alt_max) in meters
        cfg: Fit configuration
        threads: Samples run in parallel; results keep the input order
        on_sample: Called with the partial result after each sample

    Returns:
        SweepResult
    """
    cfg = cfg or FitConfig()
    half_widths = [float(w) for w in half_widths]
    _check_increasing(half_widths, "half_widths")
    if half_widths[0] <= 0:
        raise InvalidSpec("half widths must be positive")
    jobs = [
        (w, lambda w=w: GridSpec(bounds=GridBounds.centered(center, w, alt_range), n_lonlat=n_lonlat, n_alt=n_alt))
        for w in half_widths
    ]
    return _run_sweep(SweepAxis.SURFACE_AREA, truth, jobs, cfg, threads, on_sample)
