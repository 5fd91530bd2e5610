"""
Sensors module for the RPC fitter.
This module contains synthetic geolocation models used as ground truth: a projective (pinhole) camera,
a simplified pushbroom scanner and an RPC corrected by a rigid transformation, plus the projective
regression used to estimate an approximate camera center from an RPC model.

All sensors map (lon, lat, alt) to (row, col) and accept numpy arrays.
World units of the local Cartesian frame are meters (east, north, up).
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, optimize
from scipy.spatial.transform import Rotation

from tools.grid import GeolocationModel, GridBounds, GridSpec, generate_cnp_grid
from tools.rpc_model import NormalizationParams, RpcModel
from utils.errors import BehindCamera, DegenerateFit, NoAcquisition, OutOfBounds

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler()]
)
logger = logging.getLogger(__name__)

EARTH_RADIUS = 6378137.0
METERS_PER_DEGREE = np.pi / 180.0 * EARTH_RADIUS


@dataclass(frozen=True)
class LocalTangentPlane:
    """
    Equirectangular linearization about a center: meters per degree fixed at the center latitude.
    """

    lon0: float
    lat0: float
    alt0: float = 0.0

    @property
    def meters_per_degree_lon(self) -> float:
        return METERS_PER_DEGREE * np.cos(np.radians(self.lat0))

    @property
    def meters_per_degree_lat(self) -> float:
        return METERS_PER_DEGREE

    def to_local(self, lon, lat, alt) -> np.ndarray:
        """(..., 3) east/north/up meters."""
        lon, lat, alt = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (lon, lat, alt)))
        return np.stack([
            (lon - self.lon0) * self.meters_per_degree_lon,
            (lat - self.lat0) * self.meters_per_degree_lat,
            alt - self.alt0,
        ], axis=-1)

    def to_world(self, xyz: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        xyz = np.asarray(xyz, dtype=float)
        return (
            xyz[..., 0] / self.meters_per_degree_lon + self.lon0,
            xyz[..., 1] / self.meters_per_degree_lat + self.lat0,
            xyz[..., 2] + self.alt0,
        )

    def displace(self, lon, lat, alt, delta: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Move world points by a local displacement in meters without a round trip through absolute meters."""
        delta = np.asarray(delta, dtype=float)
        return (
            np.asarray(lon, dtype=float) + delta[..., 0] / self.meters_per_degree_lon,
            np.asarray(lat, dtype=float) + delta[..., 1] / self.meters_per_degree_lat,
            np.asarray(alt, dtype=float) + delta[..., 2],
        )

    @classmethod
    def from_bounds(cls, bounds: GridBounds) -> "LocalTangentPlane":
        return cls(*bounds.center)

    @classmethod
    def from_normalization(cls, norm: NormalizationParams) -> "LocalTangentPlane":
        return cls(norm.lon_offset, norm.lat_offset, norm.alt_offset)


def _check_bounds(bounds: Optional[GridBounds], lon, lat, alt, margin: float = 1e-9):
    if bounds is None:
        return
    lon, lat, alt = (np.asarray(v, dtype=float) for v in (lon, lat, alt))
    inside = (
        (lon >= bounds.lon_min - margin) & (lon <= bounds.lon_max + margin)
        & (lat >= bounds.lat_min - margin) & (lat <= bounds.lat_max + margin)
        & (alt >= bounds.alt_min - margin) & (alt <= bounds.alt_max + margin)
    )
    if not np.all(inside):
        raise OutOfBounds(f"{int(np.size(inside) - np.count_nonzero(inside))} point(s) outside the sensor bounds")


def _as_output(row: np.ndarray, col: np.ndarray):
    if np.ndim(row) == 0:
        return float(row), float(col)
    return row, col


def rotation_from_axis_angle(axis: Sequence[float], angle: float) -> np.ndarray:
    """
    Rotation matrix for a rotation of `angle` radians about `axis`.
    """
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm == 0:
        return np.eye(3)
    return Rotation.from_rotvec(axis / norm * angle).as_matrix()


def _check_rotation(R: np.ndarray, name: str = "R"):
    if R.shape != (3, 3) or not np.allclose(R.T @ R, np.eye(3), atol=1e-9) or not np.isclose(np.linalg.det(R), 1.0, atol=1e-9):
        raise ValueError(f"{name} must be a proper rotation matrix")


@dataclass(frozen=True)
class PinholeSensor:
    """
    Projective camera: (row*w, col*w, w) = P @ (east, north, up, 1) in the local frame.
    """

    P: np.ndarray
    frame: LocalTangentPlane
    bounds: Optional[GridBounds] = None

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.shape != (3, 4):
            raise ValueError(f"P must be 3x4, got {P.shape}")
        if np.linalg.matrix_rank(P) != 3:
            raise ValueError("P must have rank 3")
        P.setflags(write=False)
        object.__setattr__(self, "P", P)

    @classmethod
    def looking_down(
        cls,
        frame: LocalTangentPlane,
        center: Sequence[float],
        focal: float,
        principal_point: Tuple[float, float] = (0.0, 0.0),
        rotation: Optional[np.ndarray] = None,
        bounds: Optional[GridBounds] = None,
    ) -> "PinholeSensor":
        """
        Camera at `center` (local meters) looking straight down, image rows along -north and columns along east.

        Args:
            frame: Local tangent plane
            center: Camera center in local meters
            focal: Focal length in pixels
            principal_point: (row, col) of the principal point
            rotation: Optional extra rotation applied to the camera axes
            bounds: Optional declared ground bounds
        """
        # camera axes in the local frame: x -> image rows, y -> image columns, z -> viewing direction
        axes = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]])
        if rotation is not None:
            axes = axes @ np.asarray(rotation, dtype=float).T
        K = np.array([
            [focal, 0.0, principal_point[0]],
            [0.0, focal, principal_point[1]],
            [0.0, 0.0, 1.0],
        ])
        center = np.asarray(center, dtype=float)
        P = K @ np.hstack([axes, -(axes @ center)[:, None]])
        return cls(P=P, frame=frame, bounds=bounds)

    @property
    def camera_center(self) -> np.ndarray:
        """Null space of P in local meters."""
        _, _, Vt = np.linalg.svd(self.P)
        c = Vt[-1]
        return c[:3] / c[3]

    def homogeneous(self, lon, lat, alt) -> np.ndarray:
        xyz = self.frame.to_local(lon, lat, alt)
        ones = np.ones(xyz.shape[:-1] + (1,))
        return np.concatenate([xyz, ones], axis=-1) @ self.P.T

    def project(self, lon, lat, alt):
        _check_bounds(self.bounds, lon, lat, alt)
        x = self.homogeneous(lon, lat, alt)
        depth = x[..., 2]
        if np.any(depth <= 0):
            raise BehindCamera(f"{int(np.count_nonzero(depth <= 0))} point(s) with nonpositive depth")
        return _as_output(x[..., 0] / depth, x[..., 1] / depth)

    def to_rpc(self, norm: NormalizationParams) -> RpcModel:
        """
        Exact RPC representation: linear numerators over a common linear denominator.

        Args:
            norm: Normalization of the target model

        Returns:
            RpcModel reproducing this camera
        """
        # local coordinates are affine in the normalized ones: xyz = base + J @ (xn, yn, zn)
        base = self.frame.to_local(norm.lon_offset, norm.lat_offset, norm.alt_offset)
        J = np.diag([
            norm.lon_scale * self.frame.meters_per_degree_lon,
            norm.lat_scale * self.frame.meters_per_degree_lat,
            norm.alt_scale,
        ])
        const = self.P @ np.append(base, 1.0)
        lin = self.P[:, :3] @ J  # columns: d/dxn, d/dyn, d/dzn

        def linear_poly(k: int) -> np.ndarray:
            # RPC order starts with 1, Z, Y, X
            p = np.zeros(20)
            p[0], p[1], p[2], p[3] = const[k], lin[k, 2], lin[k, 1], lin[k, 0]
            return p

        den = linear_poly(2)
        if den[0] <= 0:
            raise BehindCamera("normalization center is behind the camera")
        num_row = (linear_poly(0) - norm.row_offset * den) / norm.row_scale
        num_col = (linear_poly(1) - norm.col_offset * den) / norm.col_scale
        return RpcModel(
            num_row=num_row / den[0],
            den_row=den / den[0],
            num_col=num_col / den[0],
            den_col=den / den[0],
            norm=norm,
        )


@dataclass(frozen=True)
class PushbroomSensor:
    """
    Line scanner on a straight orbit at constant velocity.

    The sensor line is the plane x = 0 of the camera frame; a ground point is imaged at the time it
    crosses that plane. The camera frame is the body frame (x along-track, y across-track, z down)
    composed with a constant attitude rotation and an optional sinusoidal pitch jitter.
    """

    frame: LocalTangentPlane
    position: np.ndarray
    velocity: np.ndarray
    line_period: float
    focal_ratio: float
    attitude: np.ndarray = field(default_factory=lambda: np.zeros(3))
    col_offset: float = 0.0
    jitter_amplitude: float = 0.0
    jitter_period: float = 1.0
    n_lines: Optional[int] = None
    bounds: Optional[GridBounds] = None

    def __post_init__(self):
        for name in ("position", "velocity", "attitude"):
            value = np.array(getattr(self, name), dtype=float).reshape(3)
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        if not np.linalg.norm(self.velocity) > 0:
            raise ValueError("velocity must be nonzero")
        if not self.line_period > 0 or not self.focal_ratio > 0 or not self.jitter_period > 0:
            raise ValueError("line_period, focal_ratio and jitter_period must be positive")

    @property
    def rotation(self) -> np.ndarray:
        """Camera-to-local rotation without jitter; columns are the camera axes."""
        x_b = self.velocity / np.linalg.norm(self.velocity)
        down = np.array([0.0, 0.0, -1.0])
        z_b = down - (down @ x_b) * x_b
        z_b /= np.linalg.norm(z_b)
        y_b = np.cross(z_b, x_b)
        body = np.column_stack([x_b, y_b, z_b])
        return body @ Rotation.from_rotvec(np.array(self.attitude)).as_matrix()

    def _camera_coords(self, xyz: np.ndarray, t: np.ndarray) -> np.ndarray:
        d = (xyz - self.position - np.multiply.outer(t, self.velocity)) @ self.rotation
        theta = self.jitter_amplitude * np.sin(2.0 * np.pi * t / self.jitter_period)
        c, s = np.cos(theta), np.sin(theta)
        return np.stack([
            c * d[..., 0] - s * d[..., 2],
            d[..., 1],
            s * d[..., 0] + c * d[..., 2],
        ], axis=-1)

    def acquisition_time(self, xyz: np.ndarray) -> np.ndarray:
        """
        Solve the line-time equation x_cam(t) = 0 for each local point.
        """
        xyz = np.asarray(xyz, dtype=float)
        axis = self.rotation[:, 0]
        t0 = ((xyz - self.position) @ axis) / (self.velocity @ axis)
        if self.jitter_amplitude == 0.0:
            return t0
        try:
            return optimize.newton(
                lambda t: self._camera_coords(xyz, t)[..., 0],
                np.atleast_1d(t0).astype(float),
                tol=1e-13,
                maxiter=50,
            ).reshape(np.shape(t0))
        except (RuntimeError, ValueError) as e:
            raise NoAcquisition(f"line-time equation did not converge: {str(e)}")

    def project(self, lon, lat, alt):
        _check_bounds(self.bounds, lon, lat, alt)
        xyz = self.frame.to_local(lon, lat, alt)
        t = self.acquisition_time(xyz)
        q = self._camera_coords(xyz, t)
        if np.any(q[..., 2] <= 0):
            raise NoAcquisition("point is not in front of the sensor line")
        row = t / self.line_period
        if self.n_lines is not None and np.any((row < 0) | (row > self.n_lines - 1)):
            raise NoAcquisition("point is imaged outside the simulated acquisition interval")
        col = self.col_offset + self.focal_ratio * q[..., 1] / q[..., 2]
        return _as_output(row, col)


@dataclass(frozen=True)
class CorrectedRpcSensor:
    """
    Projection corrected by a translation T then a rotation R about a center C:
    P_corrected(X) = P(R (X - T - C) + C), with X in local meters.
    """

    base: GeolocationModel
    R: np.ndarray
    T: np.ndarray
    C: np.ndarray
    frame: Optional[LocalTangentPlane] = None

    def __post_init__(self):
        R = np.array(self.R, dtype=float)
        _check_rotation(R)
        for name, value in (("R", R), ("T", np.array(self.T, dtype=float).reshape(3)), ("C", np.array(self.C, dtype=float).reshape(3))):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        if self.frame is None:
            if not isinstance(self.base, RpcModel):
                raise ValueError("a frame is required when the base is not an RpcModel")
            object.__setattr__(self, "frame", LocalTangentPlane.from_normalization(self.base.norm))

    def correct(self, lon, lat, alt):
        """Apply X -> R (X - T - C) + C in world coordinates."""
        xyz = self.frame.to_local(lon, lat, alt)
        # R (X - T - C) + C - X, exactly zero for the identity correction
        delta = (xyz - self.C) @ (self.R - np.eye(3)).T - self.T @ self.R.T
        return self.frame.displace(lon, lat, alt, delta)

    def project(self, lon, lat, alt):
        return self.base.project(*self.correct(lon, lat, alt))

    def inverse(self, base: Optional[GeolocationModel] = None) -> "CorrectedRpcSensor":
        """
        The correction undoing this one, (R^T, -R T) about the same center, applied over `base`.
        """
        return CorrectedRpcSensor(
            base=self if base is None else base,
            R=self.R.T,
            T=-(self.R @ self.T),
            C=self.C,
            frame=self.frame,
        )


def _hartley(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Isotropic normalization: centroid to origin, mean distance sqrt(dim)."""
    dim = points.shape[1]
    centroid = points.mean(axis=0)
    mean_dist = np.mean(np.linalg.norm(points - centroid, axis=1))
    if not mean_dist > 0:
        raise DegenerateFit("all sample points coincide")
    s = np.sqrt(dim) / mean_dist
    M = np.eye(dim + 1)
    M[:dim, :dim] *= s
    M[:dim, dim] = -s * centroid
    homog = np.hstack([points, np.ones((len(points), 1))]) @ M.T
    return homog, M


def dlt_camera_matrix(world: np.ndarray, image: np.ndarray, rank_tol: float = 1e-10) -> np.ndarray:
    """
    Direct linear transform estimate of a 3x4 projective matrix from 3D-2D correspondences.

    Args:
        world: (N, 3) points
        image: (N, 2) points
        rank_tol: Relative threshold on the second smallest singular value

    Returns:
        3x4 matrix mapping homogeneous world points to homogeneous image points
    """
    world = np.asarray(world, dtype=float)
    image = np.asarray(image, dtype=float)
    if len(world) < 6:
        raise DegenerateFit(f"at least 6 correspondences required, got {len(world)}")
    Xh, M3 = _hartley(world)
    uh, M2 = _hartley(image)
    n = len(world)
    A = np.zeros((2 * n, 12))
    A[0::2, 0:4] = Xh
    A[0::2, 8:12] = -uh[:, [0]] * Xh
    A[1::2, 4:8] = Xh
    A[1::2, 8:12] = -uh[:, [1]] * Xh
    _, s, Vt = linalg.svd(A, full_matrices=False)
    if s[-2] <= rank_tol * s[0]:
        raise DegenerateFit("DLT system is rank-deficient (coplanar or degenerate sample points)")
    P_norm = Vt[-1].reshape(3, 4)
    return np.linalg.inv(M2) @ P_norm @ M3


def estimate_camera_center(
    m: RpcModel,
    bounds: GridBounds,
    n_lonlat: int = 10,
    n_alt: int = 5,
) -> np.ndarray:
    """
    Approximate camera center of an RPC model by regressing a projective camera on a sample grid.

    Args:
        m: RPC model
        bounds: Sampling bounds
        n_lonlat: Samples per horizontal axis
        n_alt: Elevation layers

    Returns:
        Camera center in the local frame of the model (meters)
    """
    frame = LocalTangentPlane.from_normalization(m.norm)
    points = generate_cnp_grid(GridSpec(bounds=bounds, n_lonlat=n_lonlat, n_alt=n_alt))
    row, col = m.project(points[:, 0], points[:, 1], points[:, 2])
    world = frame.to_local(points[:, 0], points[:, 1], points[:, 2])
    P = dlt_camera_matrix(world, np.column_stack([row, col]))
    _, _, Vt = linalg.svd(P)
    c = Vt[-1]
    if abs(c[3]) <= 1e-12 * np.linalg.norm(c[:3]):
        raise DegenerateFit("regressed camera is affine (center at infinity)")
    center = c[:3] / c[3]
    logger.debug(f"Estimated camera center (local m): {center}")
    return center


def random_rpc_model(
    rng: np.random.Generator,
    norm: Optional[NormalizationParams] = None,
    denominator_spread: float = 0.1,
) -> RpcModel:
    """
    Random valid RPC model with denominators bounded away from zero on [-1, 1]^3.

    Linear terms dominate; quadratic and cubic terms are ten and a hundred times smaller.
    With the default spread every denominator stays within [0.6, 1.4].
    """
    if norm is None:
        norm = NormalizationParams(
            lon_offset=2.35, lon_scale=0.1,
            lat_offset=48.85, lat_scale=0.1,
            alt_offset=250.0, alt_scale=500.0,
            row_offset=5000.0, row_scale=5000.0,
            col_offset=5000.0, col_scale=5000.0,
        )
    order_scale = np.array([1.0] + [1.0] * 3 + [0.1] * 6 + [0.01] * 10)

    def numerator(dominant: int) -> np.ndarray:
        # rows follow latitude (index 2), columns follow longitude (index 3)
        p = rng.uniform(-1.0, 1.0, 20) * order_scale
        p[0] *= 0.1
        p[1:4] *= 0.3
        p[dominant] = rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.0)
        return p

    def denominator() -> np.ndarray:
        p = rng.uniform(-1.0, 1.0, 20) * order_scale * denominator_spread
        p[0] = 1.0
        return p

    return RpcModel(num_row=numerator(2), den_row=denominator(), num_col=numerator(3), den_col=denominator(), norm=norm)
