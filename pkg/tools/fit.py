"""
Fit module for the RPC fitter.
This module fits an RPC model to 3D-2D correspondences with ridge-regularized, iteratively
re-weighted least squares, an L-curve choice of the ridge parameter and final ICCV iterations.

The 78 unknowns are ordered [a_0..a_19, b_1..b_19, e_0..e_19, f_1..f_19]; the design matrix is
block-diagonal, so every solve is done independently on the row block and the column block.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import linalg

from tools.grid import MIN_FIT_POINTS, CorrespondenceSet
from tools.rpc_model import DEFAULT_DENOMINATOR_FLOOR, RpcModel, monomials
from utils.errors import (
    DegenerateGeometry,
    DegenerateSpectrum,
    DenominatorNearZero,
    InvalidSpec,
    NumericalFailure,
    TooFewPoints,
)

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler()]
)
logger = logging.getLogger(__name__)

N_UNKNOWNS = 78
BLOCK_SIZE = 39
CONDITION_WARNING = 1e15
DEGENERATE_FALLBACK_RATIO = 1e-8


class FitConfig(BaseModel):
    """Stopping rule, iteration caps, L-curve sampling density and denominator floor."""

    model_config = ConfigDict(frozen=True)

    rmse_tolerance: float = Field(1e-10, gt=0)
    max_wls_iterations: int = Field(20, gt=0)
    max_iccv_iterations: int = Field(20, gt=0)
    iccv_ridge_ratio: float = Field(0.1, gt=0)
    lcurve_samples: int = Field(100, gt=2)
    denominator_floor: float = Field(DEFAULT_DENOMINATOR_FLOOR, gt=0)
    threads: int = Field(1, gt=0)


@dataclass(frozen=True)
class DesignSystem:
    """
    Weighted linear system W T I = W G.

    T is (2N, 78) block-diag[M_r, M_c], G the normalized image coordinates [r, c],
    W the diagonal weights [1/b(X_i), 1/f(X_i)].
    """

    T: np.ndarray
    G: np.ndarray
    W: np.ndarray
    data: CorrespondenceSet
    denominator_floor: float = DEFAULT_DENOMINATOR_FLOOR

    @property
    def n_points(self) -> int:
        return self.T.shape[0] // 2

    def blocks(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        """Weighted (A, y) for the row block and the column block."""
        n = self.n_points
        out = []
        for k in range(2):
            rows = slice(k * n, (k + 1) * n)
            cols = slice(k * BLOCK_SIZE, (k + 1) * BLOCK_SIZE)
            w = self.W[rows]
            out.append((w[:, None] * self.T[rows, cols], w * self.G[rows]))
        return out


@dataclass
class LCurveDiagnostics:
    h_samples: np.ndarray
    log_residual_norm: np.ndarray
    log_solution_norm: np.ndarray
    curvature: np.ndarray
    sigma_min: float
    sigma_max: float
    index: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "h_samples": self.h_samples.tolist(),
            "log_residual_norm": self.log_residual_norm.tolist(),
            "log_solution_norm": self.log_solution_norm.tolist(),
            "curvature": [c if np.isfinite(c) else None for c in self.curvature.tolist()],
            "sigma_min": self.sigma_min,
            "sigma_max": self.sigma_max,
            "index": self.index,
        }


@dataclass
class FitReport:
    chosen_h: float = float("nan")
    wls_rmse_trace: List[Tuple[float, float]] = field(default_factory=list)
    iccv_rmse_trace: List[Tuple[float, float]] = field(default_factory=list)
    final_cnp_rmse: Optional[Tuple[float, float]] = None
    final_ckp_rmse: Optional[Tuple[float, float]] = None
    iterations_used: Dict[str, int] = field(default_factory=lambda: {"wls": 0, "iccv": 0})
    warnings: List[str] = field(default_factory=list)
    condition_number: float = float("nan")
    iccv_damping: float = float("nan")
    best_phase: str = "lcurve"
    threads: int = 1
    lcurve: Optional[LCurveDiagnostics] = None

    def to_dict(self, include_lcurve: bool = False) -> Dict[str, Any]:
        def pair(v):
            return None if v is None else [float(v[0]), float(v[1])]

        out = {
            "chosen_h": float(self.chosen_h),
            "wls_rmse_trace": [pair(v) for v in self.wls_rmse_trace],
            "iccv_rmse_trace": [pair(v) for v in self.iccv_rmse_trace],
            "final_cnp_rmse": pair(self.final_cnp_rmse),
            "final_ckp_rmse": pair(self.final_ckp_rmse),
            "iterations_used": dict(self.iterations_used),
            "warnings": list(self.warnings),
            "condition_number": float(self.condition_number),
            "iccv_damping": float(self.iccv_damping),
            "best_phase": self.best_phase,
            "threads": self.threads,
        }
        if include_lcurve and self.lcurve is not None:
            out["lcurve"] = self.lcurve.to_dict()
        return out

    def to_json(self, include_lcurve: bool = False) -> str:
        return json.dumps(self.to_dict(include_lcurve), indent=2, sort_keys=True)

    def warn(self, message: str):
        logger.warning(message)
        self.warnings.append(message)


def build_system(data: CorrespondenceSet) -> DesignSystem:
    """
    Assemble the linear system of the RPC equations with identity weights.

    Args:
        data: Correspondences (normalized with data.norm)

    Returns:
        DesignSystem with W = 1
    """
    n = len(data)
    if n < MIN_FIT_POINTS:
        raise TooFewPoints(n, MIN_FIT_POINTS)
    x, y, z, r, c = data.normalized()
    mono = monomials(x, y, z)
    m_r = np.hstack([mono, -r[:, None] * mono[:, 1:]])
    m_c = np.hstack([mono, -c[:, None] * mono[:, 1:]])
    T = np.zeros((2 * n, N_UNKNOWNS))
    T[:n, :BLOCK_SIZE] = m_r
    T[n:, BLOCK_SIZE:] = m_c
    G = np.concatenate([r, c])
    return DesignSystem(T=T, G=G, W=np.ones(2 * n), data=data)


def _check_finite(solution: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(solution)):
        raise NumericalFailure(f"{what} produced non-finite coefficients")
    return solution


def _svd(A: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        return linalg.svd(A, full_matrices=False, lapack_driver="gesvd")
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericalFailure(f"SVD failed: {str(e)}")


def solve_regularized(sys: DesignSystem, h: float) -> np.ndarray:
    """
    Minimize ||W(T I - G)||^2 + h^2 ||I||^2 through the SVD of each weighted block.

    Args:
        sys: Design system
        h: Ridge parameter (>= 0)

    Returns:
        Solution vector of length 78
    """
    if not h >= 0:
        raise InvalidSpec(f"ridge parameter must be >= 0, got {h}")
    parts = []
    for A, y in sys.blocks():
        U, s, Vt = _svd(A)
        denom = s ** 2 + h ** 2
        filt = np.divide(s, denom, out=np.zeros_like(s), where=denom > 0)
        parts.append(Vt.T @ (filt * (U.T @ y)))
    return _check_finite(np.concatenate(parts), "regularized solve")


def iccv_step(sys: DesignSystem, prev: np.ndarray, damping: float = 1.0) -> np.ndarray:
    """
    One ICCV iteration: solve (T^T W^2 T + mu E) I = T^T W^2 G + mu I_prev.

    With mu = 1 this is the plain ICCV correction. Each step shrinks the bias along a singular
    direction of WT by mu / (sigma^2 + mu), so a mu below the smallest squared singular value
    removes the ridge bias in a few steps.

    Args:
        sys: Design system with weights updated from prev
        prev: Previous solution vector
        damping: Weight mu of the identity term (> 0)

    Returns:
        New solution vector
    """
    if not damping > 0:
        raise InvalidSpec(f"ICCV damping must be > 0, got {damping}")
    prev = np.asarray(prev, dtype=float)
    parts = []
    for k, (A, y) in enumerate(sys.blocks()):
        U, s, Vt = _svd(A)
        p = prev[k * BLOCK_SIZE:(k + 1) * BLOCK_SIZE]
        rhs = s * (U.T @ y) + damping * (Vt @ p)
        parts.append(Vt.T @ (rhs / (s ** 2 + damping)))
    return _check_finite(np.concatenate(parts), "ICCV step")


def iccv_damping(sigma: np.ndarray, ratio: float) -> float:
    """
    Identity weight for the ICCV steps: (ratio * sigma_min)^2, with sigma_min floored at the
    rank-deficient fallback level sigma_max * 1e-8 so that numerically null directions stay damped.

    Args:
        sigma: Singular values of the design matrix, descending
        ratio: Fraction of the smallest singular value

    Returns:
        Damping weight mu
    """
    floor = float(sigma[0]) * DEGENERATE_FALLBACK_RATIO
    return float((ratio * max(float(sigma[-1]), floor)) ** 2)


def _denominators(sys: DesignSystem, solution: np.ndarray) -> np.ndarray:
    # the first 20 columns of the row block are the plain monomials
    mono = sys.T[:sys.n_points, :20]
    b = mono @ np.concatenate([[1.0], solution[20:39]])
    f = mono @ np.concatenate([[1.0], solution[59:78]])
    return np.concatenate([b, f])


def update_weights(sys: DesignSystem, sol: np.ndarray) -> DesignSystem:
    """
    Set W to [1/b(X_i), 1/f(X_i)] from the denominators of a solution.

    Args:
        sys: Design system
        sol: Solution vector

    Returns:
        Design system with the new weights
    """
    sol = _check_finite(np.asarray(sol, dtype=float), "weight update input")
    den = _denominators(sys, sol)
    small = np.abs(den) < sys.denominator_floor
    if np.any(small):
        index = int(np.argmax(small))
        raise DenominatorNearZero(index, float(den[index]))
    return replace(sys, W=1.0 / den)


def _lcurve_curvature(h: np.ndarray, s: np.ndarray, beta: np.ndarray, rho_ls2: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Closed-form L-curve: residual norm, solution norm and curvature for each h.
    """
    xi = beta / s
    eta = np.zeros(h.shape)
    rho = np.zeros(h.shape)
    phi = np.zeros(h.shape)
    dphi = np.zeros(h.shape)
    psi = np.zeros(h.shape)
    dpsi = np.zeros(h.shape)
    for j, lam in enumerate(h):
        f = s ** 2 / (s ** 2 + lam ** 2)
        cf = 1.0 - f
        eta[j] = np.linalg.norm(f * xi)
        rho[j] = np.linalg.norm(cf * beta)
        f1 = -2.0 * f * cf / lam
        f2 = -f1 * (3.0 - 4.0 * f) / lam
        phi[j] = np.sum(f * f1 * xi ** 2)
        psi[j] = np.sum(cf * f1 * beta ** 2)
        dphi[j] = np.sum((f1 ** 2 + f * f2) * xi ** 2)
        dpsi[j] = np.sum((-f1 ** 2 + cf * f2) * beta ** 2)
    rho = np.sqrt(rho ** 2 + rho_ls2)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        deta = phi / eta
        drho = -psi / rho
        ddeta = dphi / eta - deta * (deta / eta)
        ddrho = -dpsi / rho - drho * (drho / rho)
        dlogeta = deta / eta
        dlogrho = drho / rho
        ddlogeta = ddeta / eta - dlogeta ** 2
        ddlogrho = ddrho / rho - dlogrho ** 2
        curvature = (dlogrho * ddlogeta - ddlogrho * dlogeta) / (dlogrho ** 2 + dlogeta ** 2) ** 1.5
        log_rho = np.log(rho)
        log_eta = np.log(eta)
    curvature = np.where(np.isfinite(curvature), curvature, -np.inf)
    return log_rho, log_eta, curvature


def singular_values(sys: DesignSystem) -> np.ndarray:
    """Singular values of the weighted design matrix, descending."""
    return np.sort(np.concatenate([linalg.svdvals(A) for A, _ in sys.blocks()]))[::-1]


def lcurve_select_h(sys: DesignSystem, samples: int = 100) -> Tuple[float, LCurveDiagnostics]:
    """
    Choose the ridge parameter at the point of maximal curvature of the L-curve.

    Candidates are log-spaced between the smallest and largest singular values of T.

    Args:
        sys: Design system with identity weights
        samples: Number of candidate values

    Returns:
        Tuple of (h, diagnostics)
    """
    if not np.all(sys.W == 1.0):
        raise InvalidSpec("L-curve selection requires identity weights")
    s_parts, beta_parts = [], []
    rho_ls2 = 0.0
    for A, y in sys.blocks():
        U, s, _ = _svd(A)
        beta = U.T @ y
        s_parts.append(s)
        beta_parts.append(beta)
        rho_ls2 += max(float(y @ y - beta @ beta), 0.0)
    s = np.concatenate(s_parts)
    beta = np.concatenate(beta_parts)
    sigma_max = float(np.max(s))
    sigma_min = float(np.min(s))
    rank_tol = sigma_max * max(sys.T.shape) * np.finfo(float).eps
    if sigma_min <= rank_tol:
        raise DegenerateSpectrum(sigma_min, sigma_max)

    h = np.geomspace(sigma_min, sigma_max, samples)
    log_rho, log_eta, curvature = _lcurve_curvature(h, s, beta, rho_ls2)
    if not np.any(np.isfinite(curvature)):
        raise NumericalFailure("L-curve curvature is undefined at every sample")
    # ties go to the larger h
    best = np.nanmax(curvature)
    index = int(np.flatnonzero(curvature == best)[-1])
    diagnostics = LCurveDiagnostics(
        h_samples=h,
        log_residual_norm=log_rho,
        log_solution_norm=log_eta,
        curvature=curvature,
        sigma_min=sigma_min,
        sigma_max=sigma_max,
        index=index,
    )
    logger.debug(f"L-curve corner at h={h[index]:.6e} (sample {index} of {samples})")
    return float(h[index]), diagnostics


def rmse_of_solution(data: CorrespondenceSet, solution: np.ndarray, floor: float = DEFAULT_DENOMINATOR_FLOOR) -> Tuple[float, float, float]:
    """
    Pixel RMSE of a solution on its own correspondences.

    Returns:
        Tuple of (row_rmse, col_rmse, combined_rmse); combined is the root of the mean over all 2N residuals
    """
    model = RpcModel.from_solution(solution, data.norm, denominator_floor=floor)
    row, col = model.project(data.lon, data.lat, data.alt)
    dr2 = np.mean((row - data.row) ** 2)
    dc2 = np.mean((col - data.col) ** 2)
    return float(np.sqrt(dr2)), float(np.sqrt(dc2)), float(np.sqrt((dr2 + dc2) / 2.0))


def rmse_against(model: RpcModel, data: CorrespondenceSet) -> Tuple[float, float]:
    """Per-axis pixel RMSE of a model on a correspondence set."""
    row, col = model.project(data.lon, data.lat, data.alt)
    return (
        float(np.sqrt(np.mean((row - data.row) ** 2))),
        float(np.sqrt(np.mean((col - data.col) ** 2))),
    )


def _check_geometry(data: CorrespondenceSet):
    if len(data) < MIN_FIT_POINTS:
        raise TooFewPoints(len(data), MIN_FIT_POINTS)
    for name in ("lon", "lat", "alt"):
        if len(np.unique(getattr(data, name))) < 2:
            raise DegenerateGeometry(f"{name} takes a single value; its coefficients are unidentifiable")


def fit_rpc(
    data: CorrespondenceSet,
    cfg: Optional[FitConfig] = None,
    check_data: Optional[CorrespondenceSet] = None,
) -> Tuple[RpcModel, FitReport]:
    """
    Fit an RPC model to correspondences.

    Args:
        data: Control point correspondences
        cfg: Fit configuration (defaults when omitted)
        check_data: Optional check point correspondences, evaluated into final_ckp_rmse

    Returns:
        Tuple of (fitted RpcModel, FitReport)
    """
    cfg = cfg or FitConfig()
    _check_geometry(data)
    report = FitReport(threads=cfg.threads)
    report.warnings.extend(data.warnings)

    sys = build_system(data)
    sys = replace(sys, denominator_floor=cfg.denominator_floor)
    sigma = singular_values(sys)
    report.condition_number = float(sigma[0] / sigma[-1]) if sigma[-1] > 0 else float("inf")
    if report.condition_number > CONDITION_WARNING:
        report.warn(f"design matrix condition number {report.condition_number:.3e} exceeds {CONDITION_WARNING:.0e}")

    try:
        h, report.lcurve = lcurve_select_h(sys, cfg.lcurve_samples)
    except DegenerateSpectrum as e:
        h = float(sigma[0]) * DEGENERATE_FALLBACK_RATIO
        report.warn(f"{str(e)}; falling back to h={h:.6e}")
    report.chosen_h = h

    def evaluate(solution: np.ndarray) -> Tuple[float, float, float]:
        try:
            return rmse_of_solution(data, solution, cfg.denominator_floor)
        except DenominatorNearZero as e:
            report.warn(f"iterate not projectable: {str(e)}")
            return float("inf"), float("inf"), float("inf")

    solution = solve_regularized(sys, h)
    row_rmse, col_rmse, rmse = evaluate(solution)
    report.wls_rmse_trace.append((row_rmse, col_rmse))
    best = (rmse, solution, (row_rmse, col_rmse), "lcurve")
    logger.debug(f"Initial solution: RMSE {rmse:.6e} px (h={h:.6e})")

    halted = False
    previous = rmse
    for i in range(1, cfg.max_wls_iterations + 1):
        try:
            sys = update_weights(sys, solution)
        except DenominatorNearZero as e:
            report.warn(f"weighted iteration {i}: {str(e)}; keeping best iterate")
            halted = True
            break
        solution = solve_regularized(sys, h)
        row_rmse, col_rmse, rmse = evaluate(solution)
        report.wls_rmse_trace.append((row_rmse, col_rmse))
        report.iterations_used["wls"] = i
        logger.debug(f"WLS iteration {i}: RMSE {rmse:.6e} px")
        if rmse < best[0]:
            best = (rmse, solution, (row_rmse, col_rmse), "wls")
        if abs(previous - rmse) < cfg.rmse_tolerance:
            break
        previous = rmse

    if halted:
        report.warn("ICCV phase skipped after the weighted iterations halted; the ICCV trace is empty")
    else:
        report.iccv_damping = iccv_damping(sigma, cfg.iccv_ridge_ratio)
        logger.debug(f"ICCV damping {report.iccv_damping:.6e}")
        solution = best[1]
        previous = best[0]
        for k in range(1, cfg.max_iccv_iterations + 1):
            try:
                sys = update_weights(sys, solution)
            except DenominatorNearZero as e:
                report.warn(f"ICCV iteration {k}: {str(e)}; keeping best iterate")
                break
            solution = iccv_step(sys, solution, report.iccv_damping)
            row_rmse, col_rmse, rmse = evaluate(solution)
            report.iccv_rmse_trace.append((row_rmse, col_rmse))
            report.iterations_used["iccv"] = k
            logger.debug(f"ICCV iteration {k}: RMSE {rmse:.6e} px")
            if rmse < best[0]:
                best = (rmse, solution, (row_rmse, col_rmse), "iccv")
            if abs(previous - rmse) < cfg.rmse_tolerance:
                break
            previous = rmse

    if not np.isfinite(best[0]):
        raise NumericalFailure("no projectable iterate was produced")
    model = RpcModel.from_solution(best[1], data.norm, denominator_floor=cfg.denominator_floor)
    report.final_cnp_rmse = best[2]
    report.best_phase = best[3]
    if check_data is not None:
        report.final_ckp_rmse = rmse_against(model, check_data)

    logger.info(
        f"RPC fit done: h={h:.3e}, {report.iterations_used['wls']} WLS + {report.iterations_used['iccv']} ICCV iterations, "
        f"CNP RMSE row={best[2][0]:.3e} col={best[2][1]:.3e} px"
    )
    return model, report
