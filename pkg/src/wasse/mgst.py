"""Generalized Student's t kernel, correntropy cost and fixed-point weights.

With ``D = c * gamma**2`` (or ``c * gamma**xi`` when
``denominator="gamma_xi"``)::

    kernel(e) = (1 + |e|**xi / D) ** (-(c + xi) / xi)
    weight(e) = max(|e|, floor)**(xi - 2) * (1 + |e|**xi / D) ** (-(c + 2 xi) / xi)

``weight`` is ``-(d kernel / d e) / e`` up to the constant ``(c + xi) / D``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from wasse.errors import DimensionMismatch

WEIGHT_FLOOR = 1e-6


@dataclass(frozen=True)
class KernelParams:
    c: float = 2.0
    gamma: float = 12.0
    xi: float = 1.9
    denominator: str = "gamma_sq"  # or "gamma_xi"

    def __post_init__(self):
        if not (self.c > 0 and self.gamma > 0 and self.xi > 0):
            raise ValueError(f"kernel parameters must be positive: {self}")
        if self.denominator not in ("gamma_sq", "gamma_xi"):
            raise ValueError(f"unknown kernel denominator {self.denominator!r}")

    @property
    def scale(self) -> float:
        exp = 2.0 if self.denominator == "gamma_sq" else self.xi
        return self.c * self.gamma**exp


def kernel_value(e, p: KernelParams):
    """Kernel at error magnitude ``e >= 0``; equals 1 at zero."""
    a = np.abs(np.asarray(e, dtype=float))
    return (1.0 + a**p.xi / p.scale) ** (-(p.c + p.xi) / p.xi)


def mgst_cost(errors, p: KernelParams) -> float:
    """Sum of componentwise kernel values (to be maximized)."""
    return float(np.sum(kernel_value(errors, p)))


def weight(e, p: KernelParams, floor: float = WEIGHT_FLOOR):
    a = np.abs(np.asarray(e, dtype=float))
    return np.maximum(a, floor) ** (p.xi - 2.0) * (1.0 + a**p.xi / p.scale) ** (-(p.c + 2.0 * p.xi) / p.xi)


def weight_matrix(errors, alpha: int, p: KernelParams) -> tuple[np.ndarray, np.ndarray]:
    """Split per-component weights into the state block and measurement block."""
    errors = np.asarray(errors, dtype=float)
    if errors.ndim != 1 or errors.size <= alpha:
        raise DimensionMismatch(f"expected alpha + beta errors with alpha={alpha}, got shape {errors.shape}")
    w = weight(errors, p)
    return np.diag(w[:alpha]), np.diag(w[alpha:])


def cost_gradient(v, lam, Hhat, p: KernelParams, floor: float = 0.0) -> np.ndarray:
    """Analytic gradient of ``mgst_cost(lam - Hhat @ v)`` with respect to ``v``.

    ``(c + xi) / D * Hhat.T @ diag(weight) @ e``; pass ``floor=0`` for the
    exact derivative away from zero residuals.
    """
    e = lam - Hhat @ v
    w = weight(e, p, floor=floor) if floor > 0 else np.abs(e) ** (p.xi - 2.0) * (
        1.0 + np.abs(e) ** p.xi / p.scale
    ) ** (-(p.c + 2.0 * p.xi) / p.xi)
    return (p.c + p.xi) / p.scale * (Hhat.T @ (w * e))
