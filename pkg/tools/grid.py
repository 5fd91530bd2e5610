"""
Grid module for the RPC fitter.
This module generates the control point (CNP) and check point (CKP) grids and builds correspondence sets
by projecting them through a geolocation model.

Grid points are ordered altitude-major, then latitude, then longitude.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Protocol, Tuple, runtime_checkable

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from tools.rpc_model import NormalizationParams, normalization_from_extents
from utils.errors import InvalidSpec, RpcFitError, SensorProjectionError

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler()]
)
logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 39


@runtime_checkable
class GeolocationModel(Protocol):
    """
    Anything mapping (lon, lat, alt) to (row, col). Arrays are accepted and broadcast.
    """

    def project(self, lon, lat, alt) -> Tuple[np.ndarray, np.ndarray]:
        ...


class GridBounds(BaseModel):
    """Longitude/latitude/altitude box of a grid."""

    model_config = ConfigDict(frozen=True)

    lon_min: float
    lon_max: float
    lat_min: float
    lat_max: float
    alt_min: float
    alt_max: float

    @model_validator(mode="after")
    def _check_order(self):
        values = [self.lon_min, self.lon_max, self.lat_min, self.lat_max, self.alt_min, self.alt_max]
        if not all(np.isfinite(values)):
            raise InvalidSpec("grid bounds must be finite")
        if not self.lon_min < self.lon_max:
            raise InvalidSpec(f"lon_min ({self.lon_min}) must be < lon_max ({self.lon_max})")
        if not self.lat_min < self.lat_max:
            raise InvalidSpec(f"lat_min ({self.lat_min}) must be < lat_max ({self.lat_max})")
        if not self.alt_min <= self.alt_max:
            raise InvalidSpec(f"alt_min ({self.alt_min}) must be <= alt_max ({self.alt_max})")
        return self

    @property
    def center(self) -> Tuple[float, float, float]:
        return (
            (self.lon_min + self.lon_max) / 2.0,
            (self.lat_min + self.lat_max) / 2.0,
            (self.alt_min + self.alt_max) / 2.0,
        )

    @classmethod
    def centered(cls, center: Tuple[float, float], half_width: float, alt_range: Tuple[float, float]) -> "GridBounds":
        """Square footprint of the given half width (degrees) around a (lon, lat) center."""
        if not half_width > 0:
            raise InvalidSpec(f"half width must be positive, got {half_width}")
        lon, lat = center
        return cls(
            lon_min=lon - half_width, lon_max=lon + half_width,
            lat_min=lat - half_width, lat_max=lat + half_width,
            alt_min=alt_range[0], alt_max=alt_range[1],
        )


class GridSpec(BaseModel):
    """Bounds plus samples per horizontal axis (grid length) and number of elevation layers."""

    model_config = ConfigDict(frozen=True)

    bounds: GridBounds
    n_lonlat: int = 50
    n_alt: int = 10

    @model_validator(mode="after")
    def _check_counts(self):
        if self.n_lonlat < 2:
            raise InvalidSpec(f"n_lonlat must be >= 2, got {self.n_lonlat}")
        if self.n_alt < 2:
            raise InvalidSpec(f"n_alt must be >= 2, got {self.n_alt}")
        return self


def _axes(spec: GridSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    b = spec.bounds
    lons = np.linspace(b.lon_min, b.lon_max, spec.n_lonlat)
    lats = np.linspace(b.lat_min, b.lat_max, spec.n_lonlat)
    alts = np.linspace(b.alt_min, b.alt_max, spec.n_alt)
    return lons, lats, alts


def _mesh(lons: np.ndarray, lats: np.ndarray, alts: np.ndarray) -> np.ndarray:
    alt_g, lat_g, lon_g = np.meshgrid(alts, lats, lons, indexing="ij")
    return np.column_stack([lon_g.ravel(), lat_g.ravel(), alt_g.ravel()])


def _check_spec(spec: GridSpec):
    if not isinstance(spec, GridSpec):
        raise InvalidSpec(f"expected a GridSpec, got {type(spec).__name__}")


def generate_cnp_grid(spec: GridSpec) -> np.ndarray:
    """
    Generate the uniform 3D control point grid.

    Args:
        spec: Grid layout and bounds

    Returns:
        Array of shape (n_lonlat**2 * n_alt, 3) with columns lon, lat, alt
    """
    _check_spec(spec)
    return _mesh(*_axes(spec))


def generate_ckp_grid(spec: GridSpec) -> np.ndarray:
    """
    Generate the check point grid: the midpoint of every CNP grid cell.

    Args:
        spec: Grid layout and bounds

    Returns:
        Array of shape ((n_lonlat - 1)**2 * (n_alt - 1), 3)
    """
    _check_spec(spec)
    lons, lats, alts = _axes(spec)
    mid = lambda v: (v[:-1] + v[1:]) / 2.0
    return _mesh(mid(lons), mid(lats), mid(alts))


@dataclass(frozen=True)
class CorrespondenceSet:
    """
    3D-2D correspondences (lon, lat, alt, row, col) with the normalization derived from their extents.
    """

    lon: np.ndarray
    lat: np.ndarray
    alt: np.ndarray
    row: np.ndarray
    col: np.ndarray
    norm: NormalizationParams
    warnings: List[str] = field(default_factory=list, compare=False)

    def __post_init__(self):
        sizes = {len(np.ravel(getattr(self, name))) for name in ("lon", "lat", "alt", "row", "col")}
        if len(sizes) != 1:
            raise InvalidSpec("correspondence columns must have equal length")
        for name in ("lon", "lat", "alt", "row", "col"):
            values = np.array(getattr(self, name), dtype=float).ravel()
            if not np.all(np.isfinite(values)):
                raise InvalidSpec(f"non-finite values in column {name}")
            values.setflags(write=False)
            object.__setattr__(self, name, values)

    @classmethod
    def from_arrays(cls, lon, lat, alt, row, col) -> "CorrespondenceSet":
        """Build a set whose normalization comes from the extents of the data."""
        norm, warnings = normalization_from_extents(lon, lat, alt, row, col)
        return cls(lon=lon, lat=lat, alt=alt, row=row, col=col, norm=norm, warnings=warnings)

    def __len__(self) -> int:
        return len(self.lon)

    @property
    def points(self) -> np.ndarray:
        """(N, 5) array of lon, lat, alt, row, col."""
        return np.column_stack([self.lon, self.lat, self.alt, self.row, self.col])

    def normalized(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Normalized (X, Y, Z, r, c) arrays."""
        x, y, z = self.norm.normalize_world(self.lon, self.lat, self.alt)
        r, c = self.norm.normalize_image(self.row, self.col)
        return x, y, z, r, c


def _project_chunk(sensor: GeolocationModel, points: np.ndarray, start: int) -> Tuple[np.ndarray, np.ndarray]:
    try:
        row, col = sensor.project(points[:, 0], points[:, 1], points[:, 2])
        row = np.broadcast_to(np.asarray(row, dtype=float), (len(points),))
        col = np.broadcast_to(np.asarray(col, dtype=float), (len(points),))
        bad = ~(np.isfinite(row) & np.isfinite(col))
        if np.any(bad):
            raise SensorProjectionError(start + int(np.argmax(bad)), ValueError("non-finite projection"))
        return row, col
    except SensorProjectionError:
        raise
    except (RpcFitError, ArithmeticError, ValueError) as e:
        # locate the offending point
        for i, (lon, lat, alt) in enumerate(points):
            try:
                sensor.project(lon, lat, alt)
            except Exception as point_error:
                raise SensorProjectionError(start + i, point_error)
        raise SensorProjectionError(start, e)


def project_points(sensor: GeolocationModel, points: np.ndarray, threads: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """
    Project 3D points through a geolocation model.

    Args:
        sensor: Any object with project(lon, lat, alt) -> (row, col)
        points: (N, 3) array of lon, lat, alt
        threads: Number of worker threads; output order is the input order regardless

    Returns:
        Tuple of (row, col) arrays
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    n = len(points)
    logger.debug(f"Projecting {n} points through {type(sensor).__name__} with {threads} thread(s)")
    if n == 0:
        return np.empty(0), np.empty(0)
    if threads <= 1:
        return _project_chunk(sensor, points, 0)

    bounds = np.linspace(0, n, threads + 1).astype(int)
    chunks = [(points[a:b], a) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda item: _project_chunk(sensor, *item), chunks))
    return (
        np.concatenate([r for r, _ in results]),
        np.concatenate([c for _, c in results]),
    )


def build_correspondences(sensor: GeolocationModel, points: np.ndarray, threads: int = 1) -> CorrespondenceSet:
    """
    Project 3D points through a geolocation model and pair them with their image coordinates.

    Args:
        sensor: Any object with project(lon, lat, alt) -> (row, col)
        points: (N, 3) array of lon, lat, alt
        threads: Number of worker threads

    Returns:
        CorrespondenceSet normalized on its data extents
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(points) == 0:
        raise InvalidSpec("no points to project")
    row, col = project_points(sensor, points, threads)
    data = CorrespondenceSet.from_arrays(points[:, 0], points[:, 1], points[:, 2], row, col)
    for message in data.warnings:
        logger.warning(f"Correspondence normalization: {message}")
    return data
