import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from stablebranch import rng as rngmod
from stablebranch.errors import ConfigurationError
from stablebranch.stable import (StableParams, cauchy_cdf, cauchy_tail_exact, sample_increment,
                                 sample_path, sample_stable, tail_constant,
                                 tail_probability_reference, unit_sphere_area)


def test_params_validation():
    with pytest.raises(ConfigurationError):
        StableParams(2.0)
    with pytest.raises(ConfigurationError) as err:
        StableParams(0.0, 0)
    assert len(err.value.violations) == 2
    StableParams(1.99, 3)


def test_zero_step_is_zero():
    g = rngmod.stream(1)
    assert np.all(sample_increment(StableParams(1.5, 2), 0.0, g) == 0.0)
    with pytest.raises(ValueError):
        sample_increment(StableParams(1.5), -1.0, g)


def test_cauchy_matches_exact_law():
    x = sample_stable(StableParams(1.0), 2.0, 50_000, rngmod.stream(3))[:, 0]
    assert stats.kstest(x, lambda v: cauchy_cdf(v, 2.0)).pvalue > 1e-3


def test_self_similarity_of_quantiles():
    p = StableParams(1.5)
    a = sample_stable(p, 8.0, 200_000, rngmod.stream(4, 0))[:, 0]
    b = sample_stable(p, 1.0, 200_000, rngmod.stream(4, 1))[:, 0]
    qs = [0.6, 0.75, 0.9]
    np.testing.assert_allclose(np.quantile(a, qs), 4.0 * np.quantile(b, qs), rtol=0.03)


@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
def test_characteristic_function(alpha):
    # E cos(xi X_t) = exp(-t |xi|^alpha / 2), in d = 2 via subordination
    for dim in (1, 2):
        x = sample_stable(StableParams(alpha, dim), 0.7, 200_000, rngmod.stream(5, dim))
        for xi in (0.5, 1.0, 2.0):
            emp = np.cos(xi * x[:, 0]).mean()
            assert abs(emp - math.exp(-0.7 * xi ** alpha / 2)) < 0.01


def test_scalar_and_batch_samplers_agree_in_law():
    p = StableParams(1.5, 1)
    g = rngmod.stream(6)
    a = np.array([sample_increment(p, 1.0, g)[0] for _ in range(20_000)])
    b = sample_stable(p, 1.0, 20_000, rngmod.stream(7))[:, 0]
    assert stats.ks_2samp(a, b).pvalue > 1e-3


def test_rotation_invariance_2d():
    x = sample_stable(StableParams(1.5, 2), 1.0, 100_000, rngmod.stream(8))
    ang = np.arctan2(x[:, 1], x[:, 0])
    assert stats.kstest(ang, stats.uniform(-np.pi, 2 * np.pi).cdf).pvalue > 1e-3


def test_tail_constants():
    assert unit_sphere_area(1) == pytest.approx(2.0)
    assert unit_sphere_area(3) == pytest.approx(4 * math.pi)
    # Cauchy with scale 1/2: density ~ 1 / (2 pi r^2)
    assert tail_constant(StableParams(1.0, 1)) == pytest.approx(1 / (2 * math.pi))
    r = 1e6
    assert tail_probability_reference(StableParams(1.0), r) == pytest.approx(
        cauchy_tail_exact(r), rel=1e-6)
    with pytest.raises(ValueError):
        tail_probability_reference(StableParams(1.0), 0.0)


def test_path_grid():
    times = np.linspace(0, 1, 11)
    path = sample_path(StableParams(1.5), [0.5], times, rngmod.stream(9))
    assert path.positions.shape == (11, 1)
    assert path.positions[0, 0] == 0.5
    assert len(path.slice(0.2, 0.5)) == 4
    assert np.all(np.diff(path.running_max()) >= 0)


def test_reproducible_streams():
    a = sample_stable(StableParams(1.5, 2), 1.0, 10, rngmod.stream(10, 1, 2))
    b = sample_stable(StableParams(1.5, 2), 1.0, 10, rngmod.stream(10, 1, 2))
    c = sample_stable(StableParams(1.5, 2), 1.0, 10, rngmod.stream(10, 1, 3))
    assert np.array_equal(a, b) and not np.array_equal(a, c)


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(0.3, 1.99), dim=st.integers(1, 3), dt=st.floats(1e-6, 1e3))
def test_samples_are_finite(alpha, dim, dt):
    x = sample_stable(StableParams(alpha, dim), dt, 200, rngmod.stream(11))
    assert x.shape == (200, dim) and np.all(np.isfinite(x))
