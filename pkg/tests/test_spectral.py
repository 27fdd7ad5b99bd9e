import math

import numpy as np
import pytest

from stablebranch.catalyst import BallIndicator, NoCatalyst, PointMass, SphereSurface
from stablebranch.errors import DomainError
from stablebranch.spectral import (SpectralResult, eigenfunction_eval, lambda_numeric,
                                   lambda_point_catalyst, point_catalyst_ladder, potential_on_box,
                                   sphere_catalyst_threshold)


def test_point_catalyst_closed_form():
    assert lambda_point_catalyst(1.0, 1.5) == pytest.approx(-1.8247, abs=2e-4)
    assert lambda_point_catalyst(0.3, 1.5) == pytest.approx(-0.04926, abs=1e-5)
    # lambda scales as c^{alpha/(alpha-1)}
    r = lambda_point_catalyst(0.6, 1.5) / lambda_point_catalyst(0.3, 1.5)
    assert r == pytest.approx(8.0)
    with pytest.raises(DomainError):
        lambda_point_catalyst(1.0, 0.9)


def test_sphere_threshold():
    assert sphere_catalyst_threshold(1.0, 1.5, 2) == pytest.approx(0.0410, abs=1e-3)
    with pytest.raises(DomainError):
        sphere_catalyst_threshold(1.0, 1.5, 1)


def test_harmonic_like_check_free_operator():
    res = lambda_numeric(np.zeros(256), 1.5, 10.0)
    assert res.lam == 0.0 and not res.bound_state
    with pytest.raises(DomainError):
        eigenfunction_eval(res, 0.0)


def test_renormalised_point_catalyst_matches_closed_form():
    for c in (1.0, 0.3):
        V = potential_on_box(PointMass(c), 1.5, 50.0, 2 ** 14)
        res = lambda_numeric(V, 1.5, 50.0)
        assert res.lam == pytest.approx(lambda_point_catalyst(c, 1.5), rel=0.02)
        assert np.all(res.h_grid > 0)
        assert res.l2_norm() == pytest.approx(1.0)


def test_ladder_improves_with_refinement():
    lad = point_catalyst_ladder(1.0, 1.5)
    lams = [r["lambda"] for r in lad["rungs"]]
    assert all(b < a for a, b in zip(lams, lams[1:]))
    assert abs(lad["extrapolated"] / lad["closed_form"] - 1) < 0.05
    assert abs(lad["renormalized"]["lambda"] / lad["closed_form"] - 1) < 0.05


def test_ball_eigenfunction_symmetric_and_peaked():
    V = potential_on_box(BallIndicator(1.0, 1.0), 1.5, 20.0, 1024)
    res = lambda_numeric(V, 1.5, 20.0)
    assert res.lam < 0 and res.lam > -1.0  # bounded below by -max V
    h = eigenfunction_eval(res, np.array([-0.5, 0.0, 0.5, 15.0]))
    assert h[0] == pytest.approx(h[2], rel=1e-3)
    assert h[1] > h[3]
    assert res.lam <= res.meta["box_floor"] + 1e-12 or res.lam < 0


def test_json_roundtrip(tmp_path):
    V = potential_on_box(BallIndicator(1.0, 1.0), 1.5, 10.0, 256)
    res = lambda_numeric(V, 1.5, 10.0)
    path = tmp_path / "h.json"
    res.to_json(path)
    import json
    back = SpectralResult.from_dict(json.loads(path.read_text()))
    assert back.lam == res.lam
    np.testing.assert_array_equal(back.h_grid, res.h_grid)


def test_sphere_catalyst_threshold_in_2d():
    # On a periodic box of side 2L an unbound operator still has lambda ~ box floor ~ L^-2;
    # a genuine bound state makes lambda / box_floor grow as the box is enlarged.
    c = math.sqrt(sphere_catalyst_threshold(1.0, 1.5, 2))  # chosen so that r* = 1
    assert sphere_catalyst_threshold(c, 1.5, 2) == pytest.approx(1.0)
    growth = {}
    for radius in (0.5, 1.5):
        ratios = []
        for L in (8.0, 16.0):
            V = potential_on_box(SphereSurface(c, radius, tube_epsilon=0.125), 1.5, L,
                                 int(2 * L / 0.0625), dim=2)
            res = lambda_numeric(V, 1.5, L, tol=1e-9)
            ratios.append(res.lam / res.meta["box_floor"])
        growth[radius] = ratios[1] / ratios[0]
    assert growth[0.5] < 1.2
    assert growth[1.5] > 1.35


def test_sphere_threshold_homogeneity():
    r1 = sphere_catalyst_threshold(1.0, 1.5, 3)
    assert sphere_catalyst_threshold(2.0, 1.5, 3) == pytest.approx(r1 * 2 ** (-1 / 0.5))


def test_no_catalyst_potential():
    assert not potential_on_box(NoCatalyst(), 1.5, 10.0, 64).any()
