"""Covariance hygiene: symmetrization, bounded-jitter Cholesky, eigenvalue floors."""

from __future__ import annotations

import numpy as np
from scipy import linalg as sla

from wasse.errors import CholeskyFailure

JITTER_RETRIES = 6
EIG_FLOOR = 1e-10

_jitter_events = [0]


def jitter_events() -> int:
    """Number of jitter repairs performed in this process so far."""
    return _jitter_events[0]


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def safe_cholesky(a: np.ndarray, retries: int = JITTER_RETRIES) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``a`` with deterministic jitter repair.

    On failure ``j*I`` is added with ``j = 1e-12 * trace/dim``, escalating by
    10x up to ``retries`` times. Returns the factor and the jitter applied
    (0.0 when none was needed).
    """
    a = symmetrize(np.asarray(a, dtype=float))
    try:
        return np.linalg.cholesky(a), 0.0
    except np.linalg.LinAlgError:
        pass
    _jitter_events[0] += 1
    n = a.shape[0]
    scale = np.trace(a) / n
    jitter = 1e-12 * (scale if scale > 0 else 1.0)
    eye = np.eye(n)
    for _ in range(retries):
        try:
            return np.linalg.cholesky(a + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise CholeskyFailure(f"matrix not positive definite after {retries} jitter retries")


def floor_eigenvalues(a: np.ndarray, floor: float = EIG_FLOOR) -> np.ndarray:
    """Symmetrize and raise every eigenvalue below ``floor`` up to ``floor``."""
    a = symmetrize(a)
    w, v = np.linalg.eigh(a)
    if w.min() >= floor:
        return a
    w = np.maximum(w, floor)
    return symmetrize((v * w) @ v.T)


def clip_psd(a: np.ndarray) -> np.ndarray:
    """Symmetrize and clip negative eigenvalues to zero."""
    return floor_eigenvalues(a, 0.0)


def spd_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a x = b`` for SPD ``a`` (jitter-repaired if needed)."""
    L, _ = safe_cholesky(a)
    return sla.cho_solve((L, True), b)


def spd_inverse(a: np.ndarray) -> np.ndarray:
    return symmetrize(spd_solve(a, np.eye(a.shape[0])))
