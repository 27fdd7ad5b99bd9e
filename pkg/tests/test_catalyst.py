import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stablebranch.catalyst import (BallIndicator, GridDensity, KernelCatalyst, NoCatalyst,
                                   OffspringLaw, PointMass, SphereSurface, catalyst_from_dict,
                                   catalyst_to_dict, check_step, effective_point_mass,
                                   max_admissible_step, pcaf_increment, q_r_moments,
                                   read_grid_csv, renormalization_defect, total_mass,
                                   validate_catalyst, write_grid_csv)
from stablebranch.errors import ConfigurationError
from stablebranch.stable import PathGrid


def test_offspring_law_rejects_extinction():
    with pytest.raises(ConfigurationError) as err:
        OffspringLaw({0: 0.2, 2: 0.8})
    assert "p_0" in str(err.value)


def test_offspring_law_normalisation():
    with pytest.raises(ConfigurationError):
        OffspringLaw({2: 0.5, 3: 0.4})
    law = OffspringLaw({1: 0.25, 3: 0.75})
    q, r = q_r_moments(law)
    assert q == pytest.approx(2.5) and r == pytest.approx(0.75 * 6)


def test_offspring_sampling_frequencies():
    from stablebranch import rng as rngmod
    law = OffspringLaw({2: 0.3, 4: 0.7})
    g = rngmod.stream(1)
    draws = np.array([law.sample(g) for _ in range(20_000)])
    assert abs(np.mean(draws == 4) - 0.7) < 0.015


def test_catalyst_legality():
    assert validate_catalyst(PointMass(1.0), 1.5, 1) == []
    assert validate_catalyst(PointMass(1.0), 0.8, 1)
    assert validate_catalyst(PointMass(1.0), 1.5, 2)
    assert validate_catalyst(SphereSurface(1.0, 1.0), 1.5, 2) == []
    assert validate_catalyst(SphereSurface(1.0, 1.0), 1.5, 1)


def test_step_rule():
    spec = PointMass(1.0, tube_epsilon=0.05)
    limit = max_admissible_step(spec, 1.5)
    assert limit == pytest.approx((0.05 / 4) ** 1.5)
    check_step(spec, 1.5, limit)
    with pytest.raises(ConfigurationError):
        check_step(spec, 1.5, 2 * limit)
    assert max_admissible_step(NoCatalyst(), 1.5) == math.inf


def test_tube_density_integrates_to_mass():
    for spec, dim in [(PointMass(0.7, renormalize=False), 1),
                      (BallIndicator(0.5, 1.0), 1),
                      (BallIndicator(0.5, 1.0, center=(0.0, 0.0)), 2),
                      (SphereSurface(0.4, 1.0), 2)]:
        enc = KernelCatalyst(spec, 1.5, dim)
        h = 0.002
        axis = np.arange(-2, 2, h) + h / 2
        if dim == 1:
            pts = axis[:, None]
        else:
            xx, yy = np.meshgrid(axis, axis, indexing="ij")
            pts = np.column_stack([xx.ravel(), yy.ravel()])
        mass = enc.density(pts).sum() * h ** dim
        assert mass == pytest.approx(total_mass(spec, dim), rel=2e-2)


def test_distance_is_zero_on_support():
    enc = KernelCatalyst(BallIndicator(1.0, 1.0, center=(2.0,)), 1.5, 1)
    d = enc.distance(np.array([[2.5], [3.5], [0.0]]))
    np.testing.assert_allclose(d, [0.0, 0.5, 1.0])


def test_renormalisation_increases_mass():
    spec = PointMass(1.0)
    assert renormalization_defect(0.05, 1.5) > renormalization_defect(0.01, 1.5) > 0
    assert effective_point_mass(spec, 1.5, 1.0) > 1.0
    assert effective_point_mass(PointMass(1.0, renormalize=False), 1.5, 1.0) == 1.0


def test_pcaf_constant_potential():
    spec = BallIndicator(2.0, 10.0)
    times = np.linspace(0, 1, 101)
    seg = PathGrid(times, np.zeros((101, 1)))
    assert pcaf_increment(spec, seg, 0.01, 1.5) == pytest.approx(2.0)
    with pytest.raises(ConfigurationError):
        pcaf_increment(spec, seg, 0.001, 1.5)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=4, max_size=40), st.integers(1, 38))
def test_pcaf_additive_over_splits(xs, k):
    k = min(k, len(xs) - 2)
    spec = BallIndicator(1.5, 1.0)
    times = np.arange(len(xs)) * 0.01
    path = PathGrid(times, np.array(xs)[:, None])
    whole = pcaf_increment(spec, path, 0.01, 1.5)
    left = pcaf_increment(spec, path.slice(0.0, times[k]), 0.01, 1.5)
    right = pcaf_increment(spec, path.slice(times[k]), 0.01, 1.5)
    assert whole == pytest.approx(left + right, abs=1e-12)
    assert whole >= 0


def test_grid_csv_roundtrip(tmp_path):
    vals = np.array([0.0, 1.0, 2.0, 0.5])
    spec = GridDensity([-1.0], [0.5], vals)
    path = tmp_path / "v.csv"
    write_grid_csv(spec, path)
    back = read_grid_csv(path)
    np.testing.assert_allclose(back.values, vals)
    np.testing.assert_allclose(back.origin, [-1.0])
    enc = KernelCatalyst(back, 1.5, 1)
    np.testing.assert_allclose(enc.density(np.array([[-1.0], [-0.5], [0.1], [5.0]])),
                               [0.0, 1.0, 2.0, 0.0])


def test_catalyst_dict_roundtrip():
    for spec in (PointMass(0.3), BallIndicator(1.0, 0.5, center=(1.0,)), SphereSurface(2.0, 1.0)):
        assert catalyst_from_dict(catalyst_to_dict(spec)) == spec
    with pytest.raises(ConfigurationError):
        catalyst_from_dict({"type": "blob"})
