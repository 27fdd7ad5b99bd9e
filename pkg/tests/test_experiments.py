import csv
import io
import json

import numpy as np
import pytest

from stablebranch.config import config_from_dict
from stablebranch.experiments import (Ensemble, ThresholdSchedule, _slopes, ensemble_csv,
                                      growth_exponent_Lt, growth_exponent_Nt, reports_json,
                                      simulate_ensemble, survival_mask, threshold_scan)


@pytest.fixture(scope="module")
def small():
    cfg = config_from_dict({"catalyst": {"type": "point", "mass": 0.6}, "horizon": 12.0,
                            "replications": 12, "seed": 3})
    deltas = [0.05, 1.0]
    ens = simulate_ensemble(cfg, np.linspace(4, 12, 5), 12,
                            [ThresholdSchedule(d) for d in deltas])
    return cfg, ens, deltas


def test_schedule_families():
    for kind in ("constant", "log", "power"):
        s = ThresholdSchedule(0.1, kind, 2.0, 0.5)
        t = np.linspace(0.1, 50, 100)
        assert np.all(np.diff(s(t)) > 0)
    with pytest.raises(ValueError):
        ThresholdSchedule(0.0)
    with pytest.raises(ValueError):
        ThresholdSchedule(0.1, "cubic")


def test_slopes_exact_on_lines():
    t = np.linspace(0, 10, 6)
    Y = np.vstack([2 * t + 1, -t, np.full(6, np.nan)])
    s = _slopes(t, Y)
    np.testing.assert_allclose(s[:2], [2, -1])
    assert np.isnan(s[2])


def test_reports_have_consistent_fields(small):
    cfg, ens, deltas = small
    r = growth_exponent_Lt(cfg, ensemble=ens)
    assert r.slope_ci[0] <= r.slope <= r.slope_ci[1]
    assert r.t_range == (4.0, 12.0) and r.valid
    assert r.target == pytest.approx(-ens.lam / 1.5)
    n = growth_exponent_Nt(cfg, ensemble=ens)
    assert n.target == pytest.approx(-ens.lam)
    scan = threshold_scan(cfg, deltas, ensemble=ens, conditioning="none")
    crit = -ens.lam / 1.5
    assert scan[0].statistic == "median-pathwise" and scan[0].target == pytest.approx(
        -ens.lam - 1.5 * deltas[0])
    assert scan[1].statistic == "zero-fraction" and 0 <= scan[1].zero_fraction <= 1
    assert deltas[0] < crit < deltas[1]
    # consistency: the kappa -> 0 limit of the scan target is the N_t target
    assert scan[0].target + 1.5 * deltas[0] == pytest.approx(n.target)
    data = json.loads(reports_json([r, n] + scan))
    assert data[0]["observable"] == "log_Lt" and "band_note" in data[0]["meta"]


def test_critical_delta_excluded(small):
    cfg, ens, _ = small
    with pytest.raises(ValueError):
        threshold_scan(cfg, [-ens.lam / 1.5], ensemble=ens)


def test_survival_mask_keeps_top_quantile(small):
    _, ens, _ = small
    m = survival_mask(ens, 0.25)
    assert m.sum() <= ens.ok.sum() and m.sum() >= 0.5 * ens.ok.sum()


def test_no_growth_target_zero():
    cfg = config_from_dict({"catalyst": {"type": "none"}, "horizon": 4.0})
    ens = simulate_ensemble(cfg, [1.0, 2.0, 4.0], 5)
    assert np.all(ens.N == 1)
    assert growth_exponent_Nt(cfg, ensemble=ens).target == 0.0
    assert growth_exponent_Lt(cfg, ensemble=ens).target == 0.0


def test_ensemble_is_reproducible_and_csv(small):
    cfg, ens, deltas = small
    again = simulate_ensemble(cfg, ens.t_grid, 12, [ThresholdSchedule(d) for d in deltas])
    a, b = ensemble_csv(ens, deltas), ensemble_csv(again, deltas)
    assert a == b
    rows = list(csv.DictReader(io.StringIO(a)))
    assert len(rows) == 12 * 5 * (3 + len(deltas))


def test_aborted_fraction_invalidates():
    t = np.array([1.0, 2.0])
    ens = Ensemble(t, np.ones((5, 2)), np.ones((5, 2)), np.ones((5, 2)), [],
                   ["ok", "population-cap", "population-cap", "ok", "ok"], -0.1, 1.5, 0)
    cfg = config_from_dict({})
    assert not growth_exponent_Lt(cfg, ensemble=ens).valid
