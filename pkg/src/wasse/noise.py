"""Seeded noise sampling: Gaussian/Laplace mixtures and correlated Gaussian vectors.

Random streams are derived from a master seed plus an integer key, so the
draws for (run, region, step, purpose) never depend on execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from wasse.errors import NotPositiveDefinite

GAUSSIAN = "gaussian"
LAPLACE = "laplace"

# Substream purpose codes.
PROCESS = 0
MEASUREMENT = 1


@dataclass(frozen=True)
class NoiseComponent:
    weight: float
    kind: str
    mean: float
    variance: float


@dataclass(frozen=True)
class NoiseSpec:
    """Scalar mixture applied i.i.d. to every coordinate.

    An empty component tuple means noiseless.
    """

    components: tuple[NoiseComponent, ...]

    def __post_init__(self):
        if not self.components:
            return
        weights = [c.weight for c in self.components]
        if any(w < 0 for w in weights) or not math.isclose(sum(weights), 1.0, abs_tol=1e-9):
            raise ValueError(f"mixture weights must be >= 0 and sum to 1, got {weights}")
        for c in self.components:
            if c.kind not in (GAUSSIAN, LAPLACE):
                raise ValueError(f"unknown component kind {c.kind!r}")
            if not c.variance > 0:
                raise ValueError(f"component variance must be positive, got {c.variance}")

    @property
    def is_noiseless(self) -> bool:
        return not self.components

    @property
    def mean(self) -> float:
        return sum(c.weight * c.mean for c in self.components)

    @property
    def variance(self) -> float:
        """Analytic mixture variance."""
        mu = self.mean
        return sum(c.weight * (c.variance + (c.mean - mu) ** 2) for c in self.components)

    @classmethod
    def noiseless(cls) -> "NoiseSpec":
        return cls(())

    @classmethod
    def gaussian(cls, variance: float, mean: float = 0.0) -> "NoiseSpec":
        return cls((NoiseComponent(1.0, GAUSSIAN, mean, variance),))

    @classmethod
    def contaminated(
        cls,
        outlier_variance: float,
        outlier_kind: str = GAUSSIAN,
        outlier_weight: float = 0.01,
        nominal_variance: float = 1.0,
    ) -> "NoiseSpec":
        """``w * outlier + (1 - w) * N(0, nominal_variance)``."""
        return cls(
            (
                NoiseComponent(outlier_weight, outlier_kind, 0.0, outlier_variance),
                NoiseComponent(1.0 - outlier_weight, GAUSSIAN, 0.0, nominal_variance),
            )
        )


PRESETS = {
    "gauss_mix_100": NoiseSpec.contaminated(100.0),
    "gauss_mix_1000": NoiseSpec.contaminated(1000.0),
    "laplace_mix_1000": NoiseSpec.contaminated(1000.0, LAPLACE),
    "gaussian_1e-3": NoiseSpec.gaussian(1e-3),
    "none": NoiseSpec.noiseless(),
}


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``key`` under master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def sample(spec: NoiseSpec, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``dim`` i.i.d. coordinates from the mixture ``spec``.

    Laplace components are parameterized by variance, so the scale is
    ``sqrt(variance / 2)``.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if spec.is_noiseless:
        return np.zeros(dim)
    comps = spec.components
    if len(comps) == 1:
        picks = np.zeros(dim, dtype=int)
    else:
        picks = rng.choice(len(comps), size=dim, p=[c.weight for c in comps])
    out = np.empty(dim)
    for idx, c in enumerate(comps):
        mask = picks == idx
        n = int(mask.sum())
        if n == 0:
            continue
        if c.kind == GAUSSIAN:
            out[mask] = rng.normal(c.mean, math.sqrt(c.variance), size=n)
        else:
            out[mask] = rng.laplace(c.mean, math.sqrt(c.variance / 2.0), size=n)
    return out


def sample_gaussian_vector(mean: Sequence[float], cov: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """``mean + L z`` with ``L`` the lower Cholesky factor of ``cov``."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    scale = max(np.abs(cov).max(), np.finfo(float).tiny)
    if cov.shape != (mean.size, mean.size) or not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * scale):
        raise NotPositiveDefinite("covariance must be a symmetric matrix matching the mean")
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("covariance is not positive definite") from exc
    return mean + L @ rng.standard_normal(mean.size)
