"""Unscented transform primitives shared by the robust filter, the baseline and fusion.

Spread parameterization::

    phi = lam**2 * (alpha + eta) - alpha
    points: mean, mean +/- sqrt(alpha + phi) * S[:, i]   (S S^T = cov)
    w_mean[0] = phi / (alpha + phi)
    w_cov[0]  = phi / (alpha + phi) + 1 + tau - lam**2
    w[i>0]    = 1 / (2 (alpha + phi))
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from wasse.errors import DegenerateSpread
from wasse.linalg import clip_psd, floor_eigenvalues, safe_cholesky, spd_solve, symmetrize


@dataclass(frozen=True)
class UTParams:
    lam: float = math.e**2
    eta: float = 0.02
    tau: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")

    def phi(self, alpha: int) -> float:
        return self.lam**2 * (alpha + self.eta) - alpha


# Well-behaved setting used by the exactness property tests.
STANDARD_UT = UTParams(lam=1.0, eta=2.0, tau=0.0)


def ut_weights(alpha: int, p: UTParams) -> tuple[np.ndarray, np.ndarray]:
    phi = p.phi(alpha)
    denom = alpha + phi
    if not denom > 0:
        raise DegenerateSpread(f"alpha + phi = {denom} must be positive")
    wm = np.full(2 * alpha + 1, 1.0 / (2.0 * denom))
    wc = wm.copy()
    wm[0] = phi / denom
    wc[0] = phi / denom + 1.0 + p.tau - p.lam**2
    return wm, wc


def sigma_points(mean: np.ndarray, cov: np.ndarray, p: UTParams) -> np.ndarray:
    """``(2*alpha + 1, alpha)`` array: center, then ``+`` columns, then ``-`` columns."""
    return spread_points(mean, cov, p.phi(mean.size) + mean.size)


def spread_points(mean: np.ndarray, cov: np.ndarray, scale2: float) -> np.ndarray:
    if not scale2 > 0:
        raise DegenerateSpread(f"squared spread {scale2} must be positive")
    S, _ = safe_cholesky(cov)
    d = math.sqrt(scale2) * S.T  # rows are scaled columns of S
    return np.vstack([mean, mean + d, mean - d])


def weighted_cov(wc: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``sum_i wc[i] * outer(a[i], b[i])`` for deviation arrays a, b."""
    return (a * wc[:, None]).T @ b


def predict(v: np.ndarray, P: np.ndarray, region, p: UTParams) -> tuple[np.ndarray, np.ndarray]:
    """UT time update through ``f(v) = F v + G v_ss``; returns ``(v_prior, P_prior)``."""
    wm, wc = ut_weights(v.size, p)
    pts = sigma_points(v, P, p)
    fx = pts @ region.F.T + region.G @ region.steady_state
    v_prior = wm @ fx
    dev = fx - v_prior
    P_prior = weighted_cov(wc, dev, dev) + region.Q
    return v_prior, floor_eigenvalues(P_prior)


def predict_measurement(
    v_prior: np.ndarray, P_prior: np.ndarray, h: Callable[[np.ndarray], np.ndarray], p: UTParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Predicted measurement, state-measurement cross covariance (alpha x beta), and
    measurement covariance without noise."""
    wm, wc = ut_weights(v_prior.size, p)
    pts = sigma_points(v_prior, P_prior, p)
    hz = h(pts)
    z_pred = wm @ hz
    dz = hz - z_pred
    Pvz = weighted_cov(wc, pts - v_prior, dz)
    Pzz = symmetrize(weighted_cov(wc, dz, dz))
    return z_pred, Pvz, Pzz


def statistical_linearize(Pvz: np.ndarray, P_prior: np.ndarray, Pzz: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Regression slope ``H = Pvz^T P^-1`` and residual covariance
    ``E = Pzz - Pvz^T P^-1 Pvz`` (clipped to PSD)."""
    H = spd_solve(P_prior, Pvz).T
    E = clip_psd(Pzz - H @ Pvz)
    return H, E
