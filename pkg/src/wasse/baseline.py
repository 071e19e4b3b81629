"""Comparison filter: a plain per-region UKF with fixed noise covariances.

Edge measurements are ignored; every region runs independently on the same
partition as the robust estimator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from wasse.errors import FilterStepError, SingularInnovation
from wasse.linalg import clip_psd, floor_eigenvalues, spd_solve, symmetrize
from wasse.ukf import UTParams, sigma_points, ut_weights


@dataclass
class UKFState:
    v: np.ndarray
    P: np.ndarray
    prior_v: np.ndarray | None = None
    prior_P: np.ndarray | None = None


def init_ukf_state(region, P0_scale: float = 1e-2) -> UKFState:
    return UKFState(region.steady_state.copy(), P0_scale * np.eye(region.alpha))


def ukf_step(state: UKFState, region, z: np.ndarray, R: np.ndarray, p: UTParams, step: int | None = None) -> UKFState:
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        ch = int(np.flatnonzero(~np.isfinite(z))[0])
        raise FilterStepError(f"non-finite measurement in channel {ch}", region=region.region_id, step=step, channel=ch)
    wm, wc = ut_weights(region.alpha, p)

    X = sigma_points(state.v, state.P, p)
    X = X @ region.F.T + region.G @ region.steady_state
    xm = wm @ X
    dX = X - xm
    Pm = floor_eigenvalues((dX.T * wc) @ dX + region.Q)

    Y = sigma_points(xm, Pm, p)
    Zs = region.h(Y)
    zm = wm @ Zs
    dY, dZ = Y - xm, Zs - zm
    Pxz = (dY.T * wc) @ dZ
    Pzz = symmetrize((dZ.T * wc) @ dZ)

    S = Pzz + R
    try:
        K = np.linalg.solve(S, Pxz.T).T
    except np.linalg.LinAlgError as exc:
        raise SingularInnovation("innovation covariance is singular") from exc
    v = xm + K @ (z - zm)

    H = spd_solve(Pm, Pxz).T
    resid = clip_psd(Pzz - H @ Pxz)
    A = np.eye(region.alpha) - K @ H
    P = symmetrize(A @ Pm @ A.T + K @ (R + resid) @ K.T)
    return UKFState(v, P, xm, Pm)
