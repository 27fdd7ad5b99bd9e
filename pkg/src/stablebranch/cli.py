"""Command line entry point: ``stablebranch <command> --config run.yaml``.

Every command writes ``status.json`` (``"complete": false``) before touching
any result file and rewrites it with ``"complete": true`` afterwards; wall
clock timestamps appear only there, so result files are byte-identical across
reruns with the same configuration and seed.  Errors are reported as a JSON
object on stderr with a nonzero exit code.
"""
import argparse
import datetime
import json
import math
import os
import sys

import numpy as np

from . import __version__
from ._backend import backend_name
from .catalyst import PointMass, q_r_moments
from .config import DEFAULTS, config_from_dict, load_config
from .errors import ConfigurationError, DomainError, SolverError

COMMANDS = ("simulate", "fk-estimate", "spectral", "scan", "validate")

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3, 4


def _json_default(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(type(v).__name__)


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def dumps(obj):
    return json.dumps(_clean(obj), indent=2, sort_keys=True, default=_json_default) + "\n"


class Writer:
    """Single writer for one output directory, bracketed by a status file."""

    def __init__(self, out_dir, command, config):
        self.out = out_dir
        self.files = []
        os.makedirs(out_dir, exist_ok=True)
        self.status = {"command": command, "seed": int(config.seed), "backend": backend_name(),
                       "version": __version__}
        self._status(False)

    def _status(self, complete, **extra):
        body = dict(self.status, complete=complete, files=sorted(self.files),
                    updated=datetime.datetime.now(datetime.timezone.utc).isoformat(), **extra)
        tmp = os.path.join(self.out, "status.json.tmp")
        with open(tmp, "w") as fh:
            fh.write(dumps(body))
        os.replace(tmp, os.path.join(self.out, "status.json"))

    def write(self, name, text):
        with open(os.path.join(self.out, name), "w", newline="") as fh:
            fh.write(text)
        self.files.append(name)

    def finish(self, **extra):
        self._status(True, **extra)


def cmd_simulate(config, args, w):
    from .branching import run_replication
    from .experiments import spectral_bottom

    lam, spectral = spectral_bottom(config)
    kappas = config.kappa_list
    lineage = kappas if config.record_lineage_max else None
    statuses = []
    for rep in range(config.replications):
        res = run_replication(config.motion, config.catalyst, config.offspring, config.x0,
                              config.snapshot_times(), config.step_rule(), config.seed, rep,
                              kappa_list=kappas, cap=config.population_cap, spectral=spectral,
                              lineage_kappas=lineage)
        w.write(f"rep_{rep:05d}.csv", res.to_csv(kappas, lineage))
        w.write(f"rep_{rep:05d}.json", res.metadata_json() + "\n")
        statuses.append(res.status)
    w.write("summary.json", dumps({"lambda": lam, "replications": config.replications,
                                   "statuses": statuses}))
    return EXIT_OK


def cmd_fk(config, args, w):
    from .feynman_kac import estimate_exp_functional_series, estimate_tail_functional

    fk = config.fk
    q, _ = q_r_moments(config.offspring)
    rule = config.step_rule()
    if fk.get("kappa") is not None:
        ests = [estimate_tail_functional(config.catalyst, config.motion, q - 1.0, config.x0, t,
                                         float(fk["kappa"]), int(fk["n"]), config.seed, rule,
                                         fk["method"], int(fk["batches"]),
                                         float(fk["resample_every"])) for t in fk["times"]]
    else:
        ests = estimate_exp_functional_series(config.catalyst, config.motion, q - 1.0, config.x0,
                                              fk["times"], int(fk["n"]), config.seed, rule,
                                              fk["method"], int(fk["batches"]),
                                              float(fk["resample_every"]))
    out = {"estimates": [e.to_dict() for e in ests]}
    t = np.array([e.t for e in ests])
    logs = np.array([e.log_value for e in ests])
    if t.size >= 2 and np.all(np.isfinite(logs)):
        out["log_slope"] = float(np.polyfit(t, logs, 1)[0])
    w.write("fk.json", dumps(out))
    print(dumps(out), end="")
    return EXIT_OK


def cmd_spectral(config, args, w):
    from .spectral import lambda_numeric, lambda_point_catalyst, potential_on_box

    q, _ = q_r_moments(config.offspring)
    spec = config.catalyst
    alpha = config.motion.alpha
    out = {"alpha": alpha, "dim": config.motion.dim}
    if isinstance(spec, PointMass):
        out["closed_form"] = lambda_point_catalyst((q - 1.0) * spec.mass, alpha)
    if config.motion.dim == 1:
        sp = config.spectral
        V = potential_on_box(spec, alpha, sp["L"], sp["nodes"], q - 1.0)
        res = lambda_numeric(V, alpha, sp["L"], tol=sp["tol"])
        out["numeric"] = res.lam
        out["bound_state"] = res.bound_state
        out["residual"] = res.residual
        out["box"] = {"L": sp["L"], "nodes": sp["nodes"]}
        if "closed_form" in out:
            out["discrepancy"] = res.lam / out["closed_form"] - 1.0
        w.write("eigenfunction.json", res.to_json() + "\n")
    w.write("spectral.json", dumps(out))
    print(dumps(out), end="")
    return EXIT_OK


def cmd_scan(config, args, w):
    from .experiments import (ThresholdSchedule, ensemble_csv, growth_exponent_Lt,
                              growth_exponent_Nt, reports_json, simulate_ensemble,
                              spectral_bottom, threshold_scan)

    ex = config.experiment
    lam, _ = spectral_bottom(config)
    if not lam < 0:
        raise DomainError("scan requires exponential growth (lambda < 0)")
    crit = -lam / config.motion.alpha
    deltas = [float(d) * (crit if ex["delta_units"] == "critical" else 1.0) for d in ex["deltas"]]
    schedules = [ThresholdSchedule(d, ex["a_kind"], ex["a0"], ex["p"]) for d in deltas]
    ens = simulate_ensemble(config, config.t_grid(), config.replications, schedules)
    reports = []
    for cond in ("none", "survival-proxy"):
        reports.append(growth_exponent_Lt(config, conditioning=cond, ensemble=ens))
        reports.append(growth_exponent_Nt(config, conditioning=cond, ensemble=ens))
        reports.append(growth_exponent_Nt(config, statistic="median-pathwise", conditioning=cond,
                                          ensemble=ens))
        reports += threshold_scan(config, deltas, ex["a_kind"], conditioning=cond, ensemble=ens)
    w.write("ensemble.csv", ensemble_csv(ens, deltas))
    w.write("reports.json", reports_json(reports))
    for r in reports:
        if r.statistic == "zero-fraction":
            print(f"{r.observable} cond={r.conditioning} delta={r.delta:.5g} "
                  f"zero_fraction={r.zero_fraction:.3f}")
        else:
            print(f"{r.observable} cond={r.conditioning} stat={r.statistic} "
                  f"delta={'' if r.delta is None else f'{r.delta:.5g}'} slope={r.slope:.5g} "
                  f"target={r.target:.5g}")
    return EXIT_OK


def cmd_validate(config, args, w):
    from .validation import run_suite

    # the suite has its own fixed seed; the run seed is used only when given explicitly
    kw = {} if args.seed is None else {"seed": args.seed}
    if args.quick:
        kw.update(n_tail=10**6, n_ks=10**4, n_max=10**5)
    out = run_suite(**kw)
    w.write("validate.json", dumps(out))
    for r in out["results"]:
        print(f"{'PASS' if r['passed'] else 'FAIL'} {r['check']} alpha={r.get('alpha', 1.0)} "
              f"dim={r.get('dim', 1)}")
    return EXIT_OK if out["passed"] else EXIT_FAILED


HANDLERS = {"simulate": cmd_simulate, "fk-estimate": cmd_fk, "spectral": cmd_spectral,
            "scan": cmd_scan, "validate": cmd_validate}


def build_parser():
    p = argparse.ArgumentParser(prog="stablebranch",
                                description="Branching stable processes with a catalyst.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", metavar="PATH", help="YAML run configuration (defaults if omitted)")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--reps", type=int, help="number of replications")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted config override, e.g. catalyst.mass=0.5 (repeatable)")
    p.add_argument("--quick", action="store_true", help="validate: smaller sample sizes")
    return p


def _error(kind, message, code, **extra):
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}) + "\n")
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code not in (0, None):
            return _error("usage", "invalid command line", EXIT_USAGE)
        return EXIT_OK
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.reps is not None:
        overrides.append(f"replications={args.reps}")
    if args.out is not None:
        overrides.append(f"output_dir={json.dumps(args.out)}")
    try:
        if args.config:
            config = load_config(args.config, overrides)
        else:
            config = config_from_dict({}).with_overrides(overrides)
    except ConfigurationError as exc:
        return _error("configuration", str(exc), EXIT_CONFIG, violations=exc.violations)
    except OSError as exc:
        return _error("configuration", str(exc), EXIT_CONFIG)
    try:
        w = Writer(str(config.output_dir), args.command, config)
        w.write("config.yaml", config.to_yaml())
        code = HANDLERS[args.command](config, args, w)
        w.finish(exit_code=code)
        return code
    except (DomainError, SolverError, ValueError) as exc:
        return _error(type(exc).__name__, str(exc), EXIT_RUNTIME)


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
