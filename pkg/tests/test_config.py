import numpy as np
import pytest
import yaml
from hypothesis import given, settings, strategies as st

from stablebranch.config import DEFAULTS, config_from_dict, dump_config, load_config
from stablebranch.errors import ConfigurationError


def test_minimal_config_loads(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("catalyst: {type: point, mass: 0.3}\n")
    cfg = load_config(path)
    assert cfg.motion.alpha == 1.5
    assert cfg.step == pytest.approx((0.05 / 4) ** 1.5)


def test_all_violations_reported(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("motion: {alpha: 0.8}\noffspring: {p_0: 0.1, p_2: 0.9}\nreplications: 0\n")
    with pytest.raises(ConfigurationError) as err:
        load_config(path)
    text = " | ".join(err.value.violations)
    assert "p_0" in text and "alpha" in text and "replications" in text


def test_parse_error(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("motion: [unclosed\n")
    with pytest.raises(ConfigurationError):
        load_config(path)


def test_step_rule_violation():
    with pytest.raises(ConfigurationError) as err:
        config_from_dict({"time_step": 0.01})
    assert "time_step" in str(err.value)


def test_unknown_key():
    with pytest.raises(ConfigurationError):
        config_from_dict({"horizn": 3})


def test_overrides(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("{}\n")
    cfg = load_config(path, ["catalyst.mass=0.5", "seed=7", "kappa_list=[2, 4]"])
    assert cfg.catalyst.mass == 0.5 and cfg.seed == 7 and cfg.kappa_list == [2, 4]


def test_snapshot_times_end_at_horizon():
    cfg = config_from_dict({"horizon": 10.0})
    t = cfg.snapshot_times()
    assert t[-1] == 10.0 and np.all(np.diff(t) > 0)
    assert cfg.t_grid()[0] == pytest.approx(10.0 / 6)


@settings(max_examples=20, deadline=None)
@given(mass=st.floats(0.01, 2.0), seed=st.integers(0, 2**63), reps=st.integers(1, 1000),
       p2=st.floats(0.05, 0.95))
def test_roundtrip_identity(tmp_path_factory, mass, seed, reps, p2):
    cfg = config_from_dict({"catalyst": {"type": "point", "mass": mass}, "seed": seed,
                            "replications": reps, "offspring": {2: p2, 3: 1.0 - p2}})
    path = tmp_path_factory.mktemp("rt") / "c.yaml"
    dump_config(cfg, path)
    again = load_config(path)
    assert again == cfg
    assert yaml.safe_load(again.to_yaml()) == yaml.safe_load(cfg.to_yaml())


def test_defaults_table():
    assert DEFAULTS["catalyst"]["tube_epsilon"] == 0.05
    assert DEFAULTS["spectral"]["L"] == 50.0 and DEFAULTS["spectral"]["nodes"] == 2 ** 14
    assert DEFAULTS["population_cap"] == 10 ** 6
