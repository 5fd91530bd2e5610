"""
RPC model module for the RPC fitter.
This module contains the rational polynomial camera model, its normalization and its projection/localization functions.

Coordinates: X is longitude (degrees), Y is latitude (degrees), Z is altitude (meters).
Image coordinates are (row, col) in pixels with the origin at pixel index 0.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple, Union

import numpy as np

from utils.errors import (
    DenominatorNearZero,
    NoConvergence,
    NonPositiveScale,
)

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler()]
)
logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

N_COEFFS = 20
DEFAULT_DENOMINATOR_FLOOR = 1e-12
DEFAULT_LOCALIZE_TOLERANCE = 1e-9
DEFAULT_LOCALIZE_MAX_ITERATIONS = 50
LOCALIZE_FD_STEP = 1e-7

# Monomial order of the 20 RPC coefficients, as (x, y, z) exponents.
MONOMIAL_EXPONENTS = (
    (0, 0, 0),  # 1
    (0, 0, 1),  # Z
    (0, 1, 0),  # Y
    (1, 0, 0),  # X
    (0, 1, 1),  # ZY
    (1, 0, 1),  # ZX
    (1, 1, 0),  # YX
    (2, 0, 0),  # X^2
    (0, 2, 0),  # Y^2
    (0, 0, 2),  # Z^2
    (1, 1, 1),  # ZYX
    (0, 1, 2),  # Z^2 Y
    (1, 0, 2),  # Z^2 X
    (0, 2, 1),  # Y^2 Z
    (1, 2, 0),  # Y^2 X
    (2, 0, 1),  # Z X^2
    (2, 1, 0),  # Y X^2
    (0, 0, 3),  # Z^3
    (0, 3, 0),  # Y^3
    (3, 0, 0),  # X^3
)


def monomials(xn: ArrayLike, yn: ArrayLike, zn: ArrayLike) -> np.ndarray:
    """
    Build the 20 cubic monomials of normalized coordinates in RPC coefficient order.

    Args:
        xn: Normalized longitude (scalar or array)
        yn: Normalized latitude
        zn: Normalized altitude

    Returns:
        Array of shape (..., 20)
    """
    x = np.asarray(xn, dtype=float)
    y = np.asarray(yn, dtype=float)
    z = np.asarray(zn, dtype=float)
    x, y, z = np.broadcast_arrays(x, y, z)
    one = np.ones_like(x)
    return np.stack([
        one, z, y, x,
        z * y, z * x, y * x,
        x * x, y * y, z * z,
        z * y * x,
        z * z * y, z * z * x, y * y * z, y * y * x,
        z * x * x, y * x * x,
        z * z * z, y * y * y, x * x * x,
    ], axis=-1)


def eval_poly(p: Sequence[float], xn: ArrayLike, yn: ArrayLike, zn: ArrayLike) -> ArrayLike:
    """
    Evaluate a cubic RPC polynomial on normalized coordinates.

    Args:
        p: 20 coefficients in RPC monomial order
        xn, yn, zn: Normalized coordinates (scalars or arrays of the same shape)

    Returns:
        Polynomial value(s)
    """
    value = monomials(xn, yn, zn) @ np.asarray(p, dtype=float)
    if np.ndim(value) == 0:
        return float(value)
    return value


def normalize(v: ArrayLike, offset: float, scale: float) -> ArrayLike:
    """Map a value to normalized units: (v - offset) / scale."""
    if not scale > 0:
        raise NonPositiveScale(scale)
    return (v - offset) / scale


def denormalize(v: ArrayLike, offset: float, scale: float) -> ArrayLike:
    """Inverse of normalize: v * scale + offset."""
    if not scale > 0:
        raise NonPositiveScale(scale)
    return v * scale + offset


@dataclass(frozen=True)
class NormalizationParams:
    """
    Offset/scale pairs mapping world and image coordinates to [-1, 1].
    """

    lon_offset: float
    lon_scale: float
    lat_offset: float
    lat_scale: float
    alt_offset: float
    alt_scale: float
    row_offset: float
    row_scale: float
    col_offset: float
    col_scale: float

    def __post_init__(self):
        for name in ("lon_scale", "lat_scale", "alt_scale", "row_scale", "col_scale"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise NonPositiveScale(value)

    def normalize_world(self, lon: ArrayLike, lat: ArrayLike, alt: ArrayLike) -> Tuple[ArrayLike, ArrayLike, ArrayLike]:
        return (
            normalize(lon, self.lon_offset, self.lon_scale),
            normalize(lat, self.lat_offset, self.lat_scale),
            normalize(alt, self.alt_offset, self.alt_scale),
        )

    def denormalize_world(self, xn: ArrayLike, yn: ArrayLike, zn: ArrayLike) -> Tuple[ArrayLike, ArrayLike, ArrayLike]:
        return (
            denormalize(xn, self.lon_offset, self.lon_scale),
            denormalize(yn, self.lat_offset, self.lat_scale),
            denormalize(zn, self.alt_offset, self.alt_scale),
        )

    def normalize_image(self, row: ArrayLike, col: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
        return (
            normalize(row, self.row_offset, self.row_scale),
            normalize(col, self.col_offset, self.col_scale),
        )

    def denormalize_image(self, rn: ArrayLike, cn: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
        return (
            denormalize(rn, self.row_offset, self.row_scale),
            denormalize(cn, self.col_offset, self.col_scale),
        )

    def to_dict(self) -> dict:
        return {name: float(getattr(self, name)) for name in self.__dataclass_fields__}

    @classmethod
    def identity(cls) -> "NormalizationParams":
        """All offsets 0, all scales 1."""
        return cls(0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0)


def _offset_scale(values: np.ndarray, name: str, warnings: List[str]) -> Tuple[float, float]:
    vmin = float(np.min(values))
    vmax = float(np.max(values))
    offset = (vmin + vmax) / 2.0
    scale = (vmax - vmin) / 2.0
    if not scale > 0:
        message = f"degenerate {name} extent ({vmin!r}); scale set to 1"
        logger.warning(message)
        warnings.append(message)
        scale = 1.0
    return offset, scale


def normalization_from_extents(
    lon: np.ndarray,
    lat: np.ndarray,
    alt: np.ndarray,
    row: np.ndarray,
    col: np.ndarray,
) -> Tuple[NormalizationParams, List[str]]:
    """
    Compute normalization parameters so the extents of each variable map exactly to [-1, 1].

    Args:
        lon, lat, alt, row, col: Coordinate arrays

    Returns:
        Tuple of (NormalizationParams, warnings)
    """
    warnings: List[str] = []
    lon_off, lon_scale = _offset_scale(np.asarray(lon, dtype=float), "lon", warnings)
    lat_off, lat_scale = _offset_scale(np.asarray(lat, dtype=float), "lat", warnings)
    alt_off, alt_scale = _offset_scale(np.asarray(alt, dtype=float), "alt", warnings)
    row_off, row_scale = _offset_scale(np.asarray(row, dtype=float), "row", warnings)
    col_off, col_scale = _offset_scale(np.asarray(col, dtype=float), "col", warnings)
    norm = NormalizationParams(
        lon_offset=lon_off, lon_scale=lon_scale,
        lat_offset=lat_off, lat_scale=lat_scale,
        alt_offset=alt_off, alt_scale=alt_scale,
        row_offset=row_off, row_scale=row_scale,
        col_offset=col_off, col_scale=col_scale,
    )
    return norm, warnings


def _as_coeffs(values: Sequence[float], name: str) -> np.ndarray:
    coeffs = np.array(values, dtype=float).reshape(-1)
    if coeffs.shape != (N_COEFFS,):
        raise ValueError(f"{name} must have exactly {N_COEFFS} coefficients, got {coeffs.size}")
    if not np.all(np.isfinite(coeffs)):
        raise ValueError(f"{name} has non-finite coefficients")
    coeffs.setflags(write=False)
    return coeffs


@dataclass(frozen=True)
class RpcModel:
    """
    Rational polynomial camera model: row_n = a / b, col_n = e / f on normalized coordinates.
    """

    num_row: np.ndarray
    den_row: np.ndarray
    num_col: np.ndarray
    den_col: np.ndarray
    norm: NormalizationParams
    denominator_floor: float = field(default=DEFAULT_DENOMINATOR_FLOOR, compare=False)

    def __post_init__(self):
        for name in ("num_row", "den_row", "num_col", "den_col"):
            object.__setattr__(self, name, _as_coeffs(getattr(self, name), name))
        for name in ("den_row", "den_col"):
            if getattr(self, name)[0] != 1.0:
                raise ValueError(f"{name}[0] must be 1, got {getattr(self, name)[0]!r}")

    @classmethod
    def from_solution(cls, solution: np.ndarray, norm: NormalizationParams, **kwargs) -> "RpcModel":
        """
        Unpack a 78-vector [a_0..a_19, b_1..b_19, e_0..e_19, f_1..f_19] inserting b_0 = f_0 = 1.
        """
        solution = np.asarray(solution, dtype=float)
        if solution.shape != (78,):
            raise ValueError(f"solution must have 78 entries, got {solution.shape}")
        return cls(
            num_row=solution[0:20],
            den_row=np.concatenate([[1.0], solution[20:39]]),
            num_col=solution[39:59],
            den_col=np.concatenate([[1.0], solution[59:78]]),
            norm=norm,
            **kwargs,
        )

    def to_solution(self) -> np.ndarray:
        """Pack the model into the 78-vector used by the fitting system."""
        return np.concatenate([self.num_row, self.den_row[1:], self.num_col, self.den_col[1:]])

    def project_normalized(self, xn: ArrayLike, yn: ArrayLike, zn: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
        """
        Evaluate the two rational fractions on normalized world coordinates.

        Returns:
            Normalized (row, col)
        """
        mono = monomials(xn, yn, zn)
        b = mono @ self.den_row
        f = mono @ self.den_col
        for axis, den in (("row", b), ("col", f)):
            small = np.abs(den) < self.denominator_floor
            if np.any(small):
                raise DenominatorNearZero(axis, float(np.ravel(den)[np.argmax(np.ravel(small))]))
        rn = (mono @ self.num_row) / b
        cn = (mono @ self.num_col) / f
        if np.ndim(rn) == 0:
            return float(rn), float(cn)
        return rn, cn

    def project(self, lon: ArrayLike, lat: ArrayLike, alt: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
        """
        Project world coordinates to pixel coordinates.

        Args:
            lon: Longitude in degrees
            lat: Latitude in degrees
            alt: Altitude in meters

        Returns:
            Tuple of (row, col) in pixels
        """
        xn, yn, zn = self.norm.normalize_world(lon, lat, alt)
        rn, cn = self.project_normalized(xn, yn, zn)
        return self.norm.denormalize_image(rn, cn)

    def localize(
        self,
        row: float,
        col: float,
        alt: float,
        tolerance: float = DEFAULT_LOCALIZE_TOLERANCE,
        max_iterations: int = DEFAULT_LOCALIZE_MAX_ITERATIONS,
    ) -> Tuple[float, float]:
        """
        Find the (lon, lat) projecting onto (row, col) at altitude alt.

        Damped Newton iteration in normalized (lon, lat), started at the normalization center,
        with a central finite-difference Jacobian.

        Args:
            row: Row in pixels
            col: Column in pixels
            alt: Altitude in meters
            tolerance: Reprojection tolerance in pixels
            max_iterations: Iteration cap

        Returns:
            Tuple of (lon, lat) in degrees
        """
        target = np.array([row, col], dtype=float)
        zn = normalize(alt, self.norm.alt_offset, self.norm.alt_scale)

        def residual(u: np.ndarray) -> np.ndarray:
            rn, cn = self.project_normalized(u[0], u[1], zn)
            return np.array(self.norm.denormalize_image(rn, cn)) - target

        u = np.zeros(2)
        res = residual(u)
        err = float(np.max(np.abs(res)))
        h = LOCALIZE_FD_STEP
        polished = False
        for iteration in range(1, max_iterations + 1):
            if err < tolerance:
                if polished:
                    break
                # one extra step below tolerance, kept only when it reduces the residual
                polished = True
            jac = np.empty((2, 2))
            for k in range(2):
                du = np.zeros(2)
                du[k] = h
                jac[:, k] = (residual(u + du) - residual(u - du)) / (2 * h)
            try:
                step = np.linalg.solve(jac, -res)
            except np.linalg.LinAlgError:
                raise NoConvergence(iteration, err)

            # halve the step until the residual decreases
            damping = 1.0
            for _ in range(30):
                candidate = u + damping * step
                new_res = residual(candidate)
                new_err = float(np.max(np.abs(new_res)))
                if new_err < err or new_err == 0.0:
                    break
                damping /= 2.0
            else:
                if err < tolerance:
                    break
                raise NoConvergence(iteration, err)

            u, res, err = candidate, new_res, new_err
            if np.max(np.abs(u)) > 1e3:
                raise NoConvergence(iteration, err)
        if err >= tolerance:
            raise NoConvergence(max_iterations, err)

        lon, lat, _ = self.norm.denormalize_world(u[0], u[1], zn)
        return float(lon), float(lat)

    def to_dict(self) -> dict:
        return {
            "norm": self.norm.to_dict(),
            "num_row": self.num_row.tolist(),
            "den_row": self.den_row.tolist(),
            "num_col": self.num_col.tolist(),
            "den_col": self.den_col.tolist(),
        }


def localize_many(m: RpcModel, rows: np.ndarray, cols: np.ndarray, alts: np.ndarray, **kwargs) -> Tuple[np.ndarray, np.ndarray]:
    """
    Localize arrays of pixels; failed points come back as NaN.
    """
    lons = np.full(len(rows), np.nan)
    lats = np.full(len(rows), np.nan)
    for i, (r, c, a) in enumerate(zip(rows, cols, alts)):
        try:
            lons[i], lats[i] = m.localize(r, c, a, **kwargs)
        except (NoConvergence, DenominatorNearZero) as e:
            logger.warning(f"Localization failed for pixel {i}: {str(e)}")
    return lons, lats
