"""Run configuration: one YAML file, validated as a whole.

Defaults (``DEFAULTS``) are the single source of every numeric default.  A
``null`` time step resolves to the admissible step of the catalyst,
``(tube_epsilon / 4) ** alpha`` for singular catalysts.
"""
import copy
import math

import numpy as np
import yaml

from .catalyst import (OffspringLaw, catalyst_from_dict, max_admissible_step, validate_catalyst,
                       validate_offspring)
from .errors import ConfigurationError
from .kernels import StepRule
from .stable import StableParams

DEFAULTS = {
    "motion": {"alpha": 1.5, "dim": 1},
    "catalyst": {"type": "point", "mass": 0.3, "center": [0.0], "tube_epsilon": 0.05,
                 "renormalize": True},
    "offspring": {2: 1.0},
    "x0": [0.0],
    "time_step": None,
    "adaptive_steps": True,
    "step_theta": 0.125,
    "max_step": 1.0,
    "horizon": 120.0,
    "snapshots": {"kind": "geometric", "start": 1.0, "num": 25},  # stop defaults to horizon
    "kappa_list": [1.0, 10.0, 100.0],
    "record_lineage_max": False,
    "replications": 200,
    "seed": 20240501,
    "population_cap": 1000000,
    "output_dir": "out",
    "spectral": {"L": 50.0, "nodes": 16384, "tol": 1e-8},
    "fk": {"n": 100000, "method": "smc", "batches": 20, "resample_every": 1.0,
           "times": [20.0, 40.0, 60.0, 80.0], "kappa": None},
    "experiment": {"t_grid": {"kind": "linear", "start": None, "num": 11},
                   "conditioning_q": 0.2, "deltas": [0.25, 0.5, 0.75, 1.5, 2.0],
                   "delta_units": "critical", "a_kind": "constant", "a0": 1.0, "p": 0.5},
}

SCHEMA_KEYS = set(DEFAULTS)


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("offspring", "catalyst"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _times(spec, horizon, path):
    kind = spec.get("kind", "geometric")
    stop = float(spec.get("stop", horizon))
    start = spec.get("start")
    # an unset start means the last five sixths of the horizon
    start = stop / 6.0 if start is None else float(start)
    if kind == "geometric":
        t = np.geomspace(start, stop, int(spec["num"]))
    elif kind == "linear":
        t = np.linspace(start, stop, int(spec["num"]))
    elif kind == "list":
        t = np.asarray(spec["times"], dtype=float)
    else:
        raise ConfigurationError(f"{path}.kind: must be geometric, linear or list")
    return t


class SimConfig:
    """Validated configuration; ``data`` is the normalised plain-dict form."""

    def __init__(self, data):
        self.data = data
        problems = validate(data)
        if problems:
            raise ConfigurationError(problems)
        self.motion = StableParams(float(data["motion"]["alpha"]), int(data["motion"]["dim"]))
        self.catalyst = catalyst_from_dict(data["catalyst"])
        self.offspring = OffspringLaw(_offspring(data["offspring"]))

    def __eq__(self, other):
        return isinstance(other, SimConfig) and self.data == other.data

    def __getattr__(self, name):
        data = self.__dict__.get("data", {})
        if name in data:
            return data[name]
        raise AttributeError(name)

    @property
    def x0(self):
        return np.asarray(self.data["x0"], dtype=float)

    @property
    def step(self):
        ts = self.data["time_step"]
        if ts is None:
            return min(max_admissible_step(self.catalyst, self.motion.alpha), 0.01)
        return float(ts)

    def step_rule(self):
        return StepRule(self.step, adaptive=bool(self.data["adaptive_steps"]),
                        theta=float(self.data["step_theta"]),
                        max_step=max(float(self.data["max_step"]), self.step))

    def snapshot_times(self):
        t = _times(self.data["snapshots"], self.horizon, "snapshots")
        t = np.unique(np.append(t[(t > 0) & (t <= self.horizon)], self.horizon))
        return t

    def t_grid(self):
        return _times(self.data["experiment"]["t_grid"], self.horizon, "experiment.t_grid")

    def to_yaml(self):
        return yaml.safe_dump(self.data, sort_keys=True)

    def with_overrides(self, overrides):
        return SimConfig(apply_overrides(self.data, overrides))


def _offspring(d):
    out = {}
    for k, v in d.items():
        key = str(k).strip()
        if key.startswith("p_"):
            key = key[2:]
        out[int(key)] = float(v)
    return out


def validate(data):
    """Every violation in ``data`` (empty list when valid)."""
    problems = [f"{k}: unknown key" for k in data if k not in SCHEMA_KEYS]
    alpha = data["motion"].get("alpha")
    dim = data["motion"].get("dim")
    try:
        StableParams(float(alpha), int(dim))
    except ConfigurationError as exc:
        problems += [f"motion.{v}" for v in exc.violations]
        return problems
    except (TypeError, ValueError):
        return problems + ["motion: alpha and dim must be numbers"]
    try:
        off = _offspring(data["offspring"])
        problems += validate_offspring(off)
    except (TypeError, ValueError, AttributeError):
        problems.append("offspring: must map offspring counts n >= 1 to probabilities")
    try:
        spec = catalyst_from_dict(data["catalyst"])
        problems += validate_catalyst(spec, float(alpha), int(dim))
    except ConfigurationError as exc:
        problems += exc.violations
        spec = None
    except (TypeError, ValueError) as exc:
        problems.append(f"catalyst: {exc}")
        spec = None
    if len(np.atleast_1d(data["x0"])) != int(dim):
        problems.append(f"x0: expected {dim} coordinates")
    if spec is not None and data["time_step"] is not None:
        limit = max_admissible_step(spec, float(alpha))
        if not float(data["time_step"]) > 0:
            problems.append("time_step: must be positive")
        elif float(data["time_step"]) > limit * (1 + 1e-9):
            problems.append(f"time_step: {data['time_step']} exceeds the admissible step "
                            f"{limit:.6g} = (width / 4)^alpha")
    for key in ("horizon", "max_step", "step_theta"):
        if not float(data[key]) > 0:
            problems.append(f"{key}: must be positive")
    if int(data["replications"]) < 1:
        problems.append("replications: must be >= 1")
    if int(data["population_cap"]) < 1:
        problems.append("population_cap: must be >= 1")
    if not 0 <= int(data["seed"]) < 2**64:
        problems.append("seed: must be an unsigned 64-bit integer")
    if any(float(k) < 0 for k in data["kappa_list"]):
        problems.append("kappa_list: thresholds must be nonnegative")
    q = data["experiment"].get("conditioning_q", 0.2)
    if not 0 <= float(q) < 1:
        problems.append("experiment.conditioning_q: must lie in [0, 1)")
    for name in ("snapshots", "experiment.t_grid"):
        sub = data["snapshots"] if name == "snapshots" else data["experiment"]["t_grid"]
        try:
            t = _times(sub, float(data["horizon"]), name)
            if t.size == 0 or np.any(np.diff(t) <= 0) or t[0] < 0:
                problems.append(f"{name}: times must be nonnegative and increasing")
        except ConfigurationError as exc:
            problems += exc.violations
        except (KeyError, TypeError, ValueError):
            problems.append(f"{name}: malformed schedule")
    if data["fk"]["method"] not in ("mc", "smc"):
        problems.append("fk.method: must be 'mc' or 'smc'")
    return problems


def _normalise(raw):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigurationError("config: top level must be a mapping")
    data = _merge(DEFAULTS, raw)
    if "offspring" in raw:
        data["offspring"] = dict(raw["offspring"])
    data["offspring"] = {int(k) if str(k).lstrip("p_").isdigit() else k: v
                         for k, v in ({(str(k)[2:] if str(k).startswith("p_") else k): v
                                       for k, v in data["offspring"].items()}).items()}
    return data


def config_from_dict(raw):
    return SimConfig(_normalise(raw))


def load_config(path, overrides=()):
    """Read, merge with defaults, apply ``key=value`` overrides and validate."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: parse error: {exc}") from None
    data = _normalise(raw)
    return SimConfig(apply_overrides(data, overrides))


def apply_overrides(data, overrides):
    """Apply dotted ``key=value`` strings; values are parsed as YAML scalars."""
    data = copy.deepcopy(data)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigurationError(f"override {item!r}: expected key=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = yaml.safe_load(value)
    return data


def dump_config(config, path):
    with open(path, "w") as fh:
        fh.write(config.to_yaml())


def critical_delta(lam, alpha):
    return -lam / alpha if lam < 0 else math.nan
