"""Local robust estimator: UT prediction, inverse-Wishart variational updates of
the prior covariance and measurement noise, and the kernel-weighted fixed-point
correction.

One :func:`local_step` per region and time step::

    predict -> vb_prior -> J x (vb_update_P, vb_update_R, predict_measurement,
    statistical_linearize, mgst_correct, update_posterior_covariance)
    -> to_information
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from wasse.errors import DofUnderflow, FilterStepError, SingularInnovation, WasseError
from wasse.linalg import floor_eigenvalues, safe_cholesky, spd_inverse, symmetrize
from wasse.mgst import KernelParams, weight
from wasse.ukf import UTParams, predict, predict_measurement, spread_points, statistical_linearize

log = logging.getLogger(__name__)

MIN_WEIGHT = 1e-8


@dataclass(frozen=True)
class IWParams:
    """Inverse-Wishart parameters for the prior covariance (delta, Delta) and
    the measurement noise (iota, Iota)."""

    delta: float
    Delta: np.ndarray
    iota: float
    Iota: np.ndarray


@dataclass(frozen=True)
class FilterConfig:
    ut: UTParams = field(default_factory=UTParams)
    kernel: KernelParams = field(default_factory=KernelParams)
    sigma_tune: float = 0.95  # prior-covariance confidence, 0 < s < 1
    forgetting: float = 0.97  # noise-statistics forgetting factor, 0 < f <= 1
    vb_iterations: int = 3
    fp_max_iter: int = 30
    fp_tol: float = 1e-6
    weight_form: str = "inverse"  # "inverse" | "direct" | "identity"
    vb_moment_source: str = "posterior"  # "posterior" | "vb_mean"
    vb_spread: str = "matched"  # "matched" | "ut"
    early_exit: bool = True
    early_exit_tol: float = 1e-6
    P0_scale: float = 1e-2
    R0_scale: float = 1e-3
    fixed_R: np.ndarray | None = None

    def __post_init__(self):
        if self.vb_iterations < 1:
            raise ValueError("vb_iterations must be >= 1")
        if not 0 < self.sigma_tune < 1:
            raise ValueError("sigma_tune must lie in (0, 1)")
        if not 0 < self.forgetting <= 1:
            raise ValueError("forgetting must lie in (0, 1]")
        if self.weight_form not in ("inverse", "direct", "identity"):
            raise ValueError(f"unknown weight_form {self.weight_form!r}")
        if self.vb_moment_source not in ("posterior", "vb_mean"):
            raise ValueError(f"unknown vb_moment_source {self.vb_moment_source!r}")
        if self.vb_spread not in ("matched", "ut"):
            raise ValueError(f"unknown vb_spread {self.vb_spread!r}")
        if self.fp_max_iter < 1:
            raise ValueError("fp_max_iter must be >= 1")


@dataclass
class EstimatorState:
    v: np.ndarray
    P: np.ndarray
    iw: IWParams
    chi: np.ndarray
    C: np.ndarray
    prior_v: np.ndarray
    prior_P: np.ndarray
    cross_Pvz: np.ndarray | None
    pred_z: np.ndarray | None
    R_est: np.ndarray


@dataclass
class CorrectionInfo:
    iterations: int
    converged: bool
    min_weight: float
    weights: np.ndarray


@dataclass
class StepDiagnostics:
    vb_iterations: int = 0
    fp_iterations: list[int] = field(default_factory=list)
    fp_converged: bool = True
    min_weight: float = math.inf


def vb_prior(P_nominal: np.ndarray, prev: IWParams, beta: int, sigma_tune: float, forgetting: float) -> IWParams:
    """Priors for step m: the prior-covariance IW is centred on ``P_nominal``;
    the noise IW is the previous posterior passed through the forgetting factor."""
    alpha = P_nominal.shape[0]
    return IWParams(
        delta=alpha + sigma_tune + 1.0,
        Delta=sigma_tune * P_nominal,
        iota=forgetting * (prev.iota - beta - 1.0) + beta + 1.0,
        Iota=forgetting * prev.Iota,
    )


def iw_mean(dof: float, scale: np.ndarray) -> np.ndarray:
    p = scale.shape[0]
    denom = dof - p - 1.0
    if not denom > 0:
        raise DofUnderflow(f"IW mean undefined: dof {dof} <= dim + 1 = {p + 1}")
    return symmetrize(scale / denom)


def moment_points(v: np.ndarray, P: np.ndarray, spread: str = "matched", ut: UTParams | None = None) -> np.ndarray:
    """Points whose uniform 1/(2a+1) average reproduces (v, P).

    ``spread="ut"`` uses the UT spread instead, which only matches the
    covariance when ``alpha + phi = alpha + 1/2``.
    """
    a = v.size
    scale2 = (2 * a + 1) / 2.0 if spread == "matched" else a + (ut or UTParams()).phi(a)
    return spread_points(v, P, scale2)


def scatter(ref: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Uniform average of ``outer(ref - values[i], ref - values[i])``."""
    d = ref - values
    return d.T @ d / values.shape[0]


def vb_update_P(prior: IWParams, M: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Return ``(delta, Delta, P_mean)`` after adding the scatter ``M``."""
    delta = prior.delta + 1.0
    Delta = prior.Delta + M
    return delta, Delta, iw_mean(delta, Delta)


def vb_update_R(prior: IWParams, A: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Return ``(iota, Iota, R)`` after adding the residual scatter ``A``."""
    iota = prior.iota + 1.0
    Iota = prior.Iota + A
    return iota, Iota, floor_eigenvalues(iw_mean(iota, Iota), 1e-12)


def mgst_correct(
    v_prior: np.ndarray,
    P_prior: np.ndarray,
    R: np.ndarray,
    E: np.ndarray,
    H: np.ndarray,
    z: np.ndarray,
    z_pred: np.ndarray,
    kernel: KernelParams,
    max_iter: int = 30,
    tol: float = 1e-6,
    weight_form: str = "inverse",
) -> tuple[np.ndarray, np.ndarray, CorrectionInfo]:
    """Kernel-weighted fixed-point correction on the whitened augmented model.

    The augmented system stacks the prior ``v_prior = v + e_p`` and the
    linearized measurement ``z + H v_prior - z_pred = H v + e_r``; both are
    whitened by the Cholesky factors of ``P_prior`` and ``R + E``. Each pass
    reweights the factors (``S diag(1/psi) S^T`` for ``weight_form="inverse"``)
    and recomputes the gain. Returns the state, the last gain and iteration info.
    """
    alpha = v_prior.size
    Sp, _ = safe_cholesky(P_prior)
    Sr, _ = safe_cholesky(R + E)
    lam_p = solve_triangular(Sp, v_prior, lower=True, check_finite=False)
    Hp = solve_triangular(Sp, np.eye(alpha), lower=True, check_finite=False)
    lam_r = solve_triangular(Sr, z + H @ v_prior - z_pred, lower=True, check_finite=False)
    Hr = solve_triangular(Sr, H, lower=True, check_finite=False)
    innov = z - z_pred

    v = v_prior
    w = np.ones(alpha + z.size)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if weight_form != "identity":
            e = np.concatenate([lam_p - Hp @ v, lam_r - Hr @ v])
            w = weight(e, kernel)
        scale = 1.0 / np.maximum(w, MIN_WEIGHT) if weight_form == "inverse" else w
        Pt = (Sp * scale[:alpha]) @ Sp.T
        Rt = (Sr * scale[alpha:]) @ Sr.T
        S = symmetrize(H @ Pt @ H.T + Rt)
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError as exc:
            raise SingularInnovation("weighted innovation covariance is not positive definite") from exc
        K = solve_triangular(L, solve_triangular(L, H @ Pt, lower=True, check_finite=False), lower=True, trans="T").T
        v_new = v_prior + K @ innov
        step = np.linalg.norm(v_new - v)
        v = v_new
        if weight_form == "identity" or step <= tol * max(1.0, np.linalg.norm(v)):
            converged = True
            break
    if not converged:
        log.warning("kernel fixed point did not converge in %d iterations", max_iter)
    return v, K, CorrectionInfo(it, converged, float(w.min()), w)


def update_posterior_covariance(P_prior, K, H, R, E) -> np.ndarray:
    """Joseph form ``(I - K H) P (I - K H)^T + K (R + E) K^T``."""
    A = np.eye(P_prior.shape[0]) - K @ H
    return symmetrize(A @ P_prior @ A.T + K @ (R + E) @ K.T)


def to_information(v: np.ndarray, P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(chi, C) = (P^-1 v, P^-1)``."""
    C = spd_inverse(P)
    return C @ v, C


def from_information(chi: np.ndarray, C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    P = spd_inverse(C)
    return P @ chi, P


def init_state(region, cfg: FilterConfig) -> EstimatorState:
    """Steady-state start with weakly informative priors centred on the
    nominal noise level ``R0_scale * I``."""
    a, b = region.alpha, region.beta
    v = region.steady_state.copy()
    P = cfg.P0_scale * np.eye(a)
    iota = b + 2.0
    Iota = (iota - b - 1.0) * cfg.R0_scale * np.eye(b)
    R = cfg.fixed_R if cfg.fixed_R is not None else cfg.R0_scale * np.eye(b)
    chi, C = to_information(v, P)
    iw = IWParams(a + cfg.sigma_tune + 1.0, cfg.sigma_tune * P, iota, Iota)
    return EstimatorState(v, P, iw, chi, C, v.copy(), P.copy(), None, None, np.array(R, dtype=float))


def local_step(
    state: EstimatorState, region, z: np.ndarray, cfg: FilterConfig, step: int | None = None
) -> tuple[EstimatorState, StepDiagnostics]:
    """Advance one region's estimate to the next step (before fusion)."""
    z = np.asarray(z, dtype=float)
    bad = np.flatnonzero(~np.isfinite(z))
    if bad.size:
        raise FilterStepError(
            f"non-finite measurement in channel {int(bad[0])}", region=region.region_id, step=step, channel=int(bad[0])
        )
    try:
        return _local_step(state, region, z, cfg)
    except WasseError as exc:
        if isinstance(exc, FilterStepError):
            raise
        raise FilterStepError(f"region {region.region_id} step {step}: {exc}", region=region.region_id, step=step) from exc


def _local_step(state: EstimatorState, region, z: np.ndarray, cfg: FilterConfig):
    h = region.h
    beta = z.size
    diag = StepDiagnostics()

    v_prior, P_nominal = predict(state.v, state.P, region, cfg.ut)
    prior = vb_prior(P_nominal, state.iw, beta, cfg.sigma_tune, cfg.forgetting)

    v_j, P_j = v_prior, P_nominal
    P_vb = P_nominal
    R = state.R_est
    iota, Iota = state.iw.iota, state.iw.Iota
    delta, Delta = prior.delta, prior.Delta
    for j in range(1, cfg.vb_iterations + 1):
        diag.vb_iterations = j
        pts = moment_points(v_j, P_j if cfg.vb_moment_source == "posterior" else P_vb, cfg.vb_spread, cfg.ut)
        delta, Delta, P_vb = vb_update_P(prior, scatter(v_prior, pts))
        R_old = R
        if cfg.fixed_R is None:
            iota, Iota, R = vb_update_R(prior, scatter(z, h(pts)))
        else:
            R = cfg.fixed_R

        z_pred, Pvz, Pzz = predict_measurement(v_prior, P_vb, h, cfg.ut)
        H, E = statistical_linearize(Pvz, P_vb, Pzz)
        v_new, K, info = mgst_correct(
            v_prior, P_vb, R, E, H, z, z_pred, cfg.kernel, cfg.fp_max_iter, cfg.fp_tol, cfg.weight_form
        )
        P_new = update_posterior_covariance(P_vb, K, H, R, E)
        diag.fp_iterations.append(info.iterations)
        diag.fp_converged &= info.converged
        diag.min_weight = min(diag.min_weight, info.min_weight)

        moved = np.linalg.norm(v_new - v_j)
        v_j, P_j = v_new, P_new
        if cfg.early_exit and j > 1:
            dR = np.linalg.norm(R - R_old) / max(np.linalg.norm(R), 1e-300)
            if dR < cfg.early_exit_tol and moved < cfg.early_exit_tol:
                break

    chi, C = to_information(v_j, P_j)
    iw = IWParams(delta, Delta, iota, Iota)
    new = EstimatorState(v_j, P_j, iw, chi, C, v_prior, P_vb, Pvz, z_pred, R)
    return new, diag
