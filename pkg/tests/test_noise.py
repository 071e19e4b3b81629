import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wasse.errors import NotPositiveDefinite
from wasse.noise import (
    GAUSSIAN,
    LAPLACE,
    PRESETS,
    NoiseComponent,
    NoiseSpec,
    sample,
    sample_gaussian_vector,
    substream,
)

N = 10**6


def _fourth_moment(spec):
    # Gaussian m4 = 3 v^2, Laplace m4 = 6 v^2 (zero means)
    return sum(c.weight * (3.0 if c.kind == GAUSSIAN else 6.0) * c.variance**2 for c in spec.components)


def test_unit_gaussian_variance():
    x = sample(NoiseSpec.gaussian(1.0), N, np.random.default_rng(1))
    assert 0.99 <= x.var() <= 1.01


@pytest.mark.parametrize(
    "name, expected_var",
    [("gauss_mix_100", 1.99), ("gauss_mix_1000", 10.99), ("laplace_mix_1000", 10.99)],
)
def test_mixture_moments(name, expected_var):
    spec = PRESETS[name]
    assert spec.variance == pytest.approx(expected_var)
    x = sample(spec, N, np.random.default_rng(2))
    se_mean = math.sqrt(expected_var / N)
    se_var = math.sqrt((_fourth_moment(spec) - expected_var**2) / N)
    assert abs(x.mean()) < 3 * se_mean
    assert abs(x.var() - expected_var) < 3 * se_var


def test_laplace_kurtosis():
    x = sample(NoiseSpec((NoiseComponent(1.0, LAPLACE, 0.0, 2.0),)), N, np.random.default_rng(3))
    excess = np.mean((x - x.mean()) ** 4) / x.var() ** 2 - 3.0
    assert excess == pytest.approx(3.0, rel=0.1)


def test_laplace_scale_from_variance():
    x = sample(NoiseSpec((NoiseComponent(1.0, LAPLACE, 0.0, 8.0),)), N, np.random.default_rng(4))
    # variance b -> scale sqrt(b/2) = 2, so E|x| = 2
    assert np.mean(np.abs(x)) == pytest.approx(2.0, rel=0.01)
    assert x.var() == pytest.approx(8.0, rel=0.02)


def test_tiny_variance_concentrates():
    x = sample(NoiseSpec.gaussian(1e-12, mean=0.3), 1000, np.random.default_rng(5))
    assert np.all(np.abs(x - 0.3) < 1e-5)


def test_noiseless_is_zero():
    assert np.all(sample(NoiseSpec.noiseless(), 5, np.random.default_rng(0)) == 0)


def test_dim_must_be_positive():
    with pytest.raises(ValueError):
        sample(NoiseSpec.gaussian(1.0), 0, np.random.default_rng(0))


@pytest.mark.parametrize(
    "components",
    [
        (NoiseComponent(0.5, GAUSSIAN, 0, 1),),
        (NoiseComponent(-0.1, GAUSSIAN, 0, 1), NoiseComponent(1.1, GAUSSIAN, 0, 1)),
        (NoiseComponent(1.0, GAUSSIAN, 0, 0.0),),
        (NoiseComponent(1.0, "cauchy", 0, 1.0),),
    ],
)
def test_invalid_specs(components):
    with pytest.raises(ValueError):
        NoiseSpec(components)


def test_gaussian_vector_tiny_cov():
    x = sample_gaussian_vector([1.0, 2.0], 1e-24 * np.eye(2), np.random.default_rng(0))
    np.testing.assert_allclose(x, [1.0, 2.0], atol=1e-9)


def test_gaussian_vector_covariance():
    rng = np.random.default_rng(6)
    cov = 0.01**2 * np.eye(2)
    xs = np.array([sample_gaussian_vector(np.zeros(2), cov, rng) for _ in range(10**5)])
    emp = np.cov(xs.T)
    assert np.linalg.norm(emp - cov) / np.linalg.norm(cov) < 0.05


@pytest.mark.parametrize("cov", [np.array([[1.0, 0.5], [0.0, 1.0]]), -np.eye(2), np.eye(3)])
def test_gaussian_vector_rejects(cov):
    with pytest.raises(NotPositiveDefinite):
        sample_gaussian_vector(np.zeros(2), cov, np.random.default_rng(0))


@given(st.integers(0, 2**32 - 1), st.integers(0, 50), st.integers(0, 5), st.integers(1, 200))
def test_substreams_deterministic(seed, run, region, step):
    a = substream(seed, run, region, step, 1).normal(size=4)
    b = substream(seed, run, region, step, 1).normal(size=4)
    np.testing.assert_array_equal(a, b)


def test_substreams_distinct():
    a = substream(7, 0, 1, 1, 0).normal(size=8)
    b = substream(7, 0, 1, 1, 1).normal(size=8)
    c = substream(7, 1, 1, 1, 0).normal(size=8)
    assert not np.allclose(a, b) and not np.allclose(a, c)
