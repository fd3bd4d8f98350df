"""Command-line interface: run, sweep, validate, diagnose.

Environment variables prefixed THERMORICHARDS_ (CONFIG, OUT, HORIZON, SEED,
THREADS) provide defaults for the corresponding flags; explicit flags win.
Exit codes: 0 success, 1 configuration/usage error, 2 failed invariant or
nonconverged step (with a machine-readable failure.json in the output
directory).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional

import numpy as np

ENV_PREFIX = "THERMORICHARDS_"


def _env(name: str, cast=str, default=None):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError:
        raise SystemExit(f"invalid value for {ENV_PREFIX}{name}: {raw!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="thermorichards",
        description="Structure-preserving solver for nonisothermal multispecies "
                    "Richards flow with cross diffusion.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, horizon=True):
        p.add_argument("--config", default=_env("CONFIG"),
                       help="YAML configuration file (defaults apply if omitted)")
        p.add_argument("--out", default=_env("OUT", str, "out"),
                       help="output directory")
        if horizon:
            p.add_argument("--horizon", type=float,
                           default=_env("HORIZON", float),
                           help="simulated time span (overrides run.horizon)")
        p.add_argument("--seed", type=int, default=_env("SEED", int),
                       help="seed for initial-condition perturbation noise")
        p.add_argument("--threads", type=int, default=_env("THREADS", int),
                       help="worker processes for sweeps")

    common(sub.add_parser("run", help="single simulation"))
    common(sub.add_parser("sweep", help="tau/eps/delta parameter sweep"))
    pv = sub.add_parser("validate", help="hypothesis validation report only")
    pv.add_argument("--config", default=_env("CONFIG"))
    pd = sub.add_parser("diagnose", help="recompute diagnostics from field dumps")
    pd.add_argument("--out", default=_env("OUT", str, "out"),
                    help="directory of a previous run")
    return ap


def _load(args):
    from .config import load_config, parse_config
    if getattr(args, "config", None):
        return load_config(args.config)
    return parse_config("")


def _write_failure(out_dir: str, exc: Exception, extra: Optional[dict] = None):
    from .fields_io import ensure_dir
    ensure_dir(out_dir)
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if extra:
        payload.update(extra)
    with open(os.path.join(out_dir, "failure.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)


def cmd_run(args) -> int:
    from .diagnostics import apriori_monitors
    from .fields_io import (ensure_dir, write_diagnostics_csv, write_fields)
    from .solver import InvariantViolation, StepFailure, run_simulation
    from . import kernels

    rc = _load(args)
    if args.seed is not None:
        rc.data["run"]["seed"] = int(args.seed)
    horizon = args.horizon if args.horizon is not None \
        else float(rc.data["run"]["horizon"])
    problem = rc.problem()
    opts = rc.solver_options()
    state0 = rc.initial_state(problem, seed=int(rc.data["run"]["seed"]))
    out_dir = ensure_dir(args.out)
    with open(os.path.join(out_dir, "config.yaml"), "w", encoding="utf-8") as fh:
        fh.write(rc.serialize())

    cadence = int(rc.data["output"]["cadence"])
    formats = rc.data["output"]["formats"]

    try:
        traj = run_simulation(state0, problem, opts, horizon=horizon,
                              dump_every=cadence)
    except (InvariantViolation, StepFailure) as exc:
        _write_failure(out_dir, exc)
        print(f"FAILED: {exc}", file=sys.stderr)
        return 2

    write_diagnostics_csv(os.path.join(out_dir, "diagnostics.csv"),
                          traj.records, problem.params.N)
    for step, st in zip(traj.dump_steps, traj.states):
        write_fields(st, problem, os.path.join(out_dir, f"fields_{step:06d}"),
                     formats)
    summary = {
        "steps": len(traj.records) - 1,
        "horizon": horizon,
        "compiled_kernels": kernels.USING_COMPILED,
        "final_lyapunov": traj.records[-1].lyapunov,
        "apriori_monitors": apriori_monitors(traj.records, problem.params),
    }
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    print(f"ok: {summary['steps']} steps, diagnostics in "
          f"{os.path.join(out_dir, 'diagnostics.csv')}")
    return 0


def cmd_sweep(args) -> int:
    from .solver import InvariantViolation, StepFailure
    from .sweep import SUMMARY_COLS, run_sweep

    rc = _load(args)
    if args.seed is not None:
        rc.data["run"]["seed"] = int(args.seed)
    horizon = args.horizon if args.horizon is not None \
        else float(rc.data["run"]["horizon"])
    threads = args.threads if args.threads is not None \
        else int(rc.data["run"]["threads"])
    try:
        rows = run_sweep(rc.data, args.out, horizon,
                         int(rc.data["run"]["seed"]), threads)
    except (InvariantViolation, StepFailure) as exc:
        _write_failure(args.out, exc)
        print(f"FAILED: {exc}", file=sys.stderr)
        return 2
    widths = {c: max(len(c), 12) for c in SUMMARY_COLS}
    print("  ".join(c.ljust(widths[c]) for c in SUMMARY_COLS))
    for row in rows:
        cells = []
        for c in SUMMARY_COLS:
            v = row[c]
            cells.append((f"{v:.6g}" if isinstance(v, float) else str(v))
                         .ljust(widths[c]))
        print("  ".join(cells))
    return 0


def cmd_validate(args) -> int:
    from .config import ConfigError, load_config, parse_config
    from .hypotheses import validate_hypotheses

    try:
        rc = _load(args)
    except ConfigError as exc:
        print(f"INVALID: {exc}", file=sys.stderr)
        return 1
    params = rc.params()
    report = validate_hypotheses(params, rc.closures(params))
    print(report)
    bound = rc.closures(params).sat_floor_bound(params.p_at)
    print(f"[info] saturation-floor eps bound f^-1(p_at/lambda0) = {bound:.6g}")
    return 0 if report.passed else 1


def cmd_diagnose(args) -> int:
    import glob
    import re
    from .config import load_config
    from .diagnostics import diagnose_pair
    from .fields_io import read_fields_csv, state_from_fields, write_diagnostics_csv

    cfg_path = os.path.join(args.out, "config.yaml")
    if not os.path.exists(cfg_path):
        print(f"no config.yaml in {args.out}", file=sys.stderr)
        return 1
    rc = load_config(cfg_path)
    problem = rc.problem()
    tau = problem.params.tau
    dumps = sorted(glob.glob(os.path.join(args.out, "fields_*.csv")))
    if not dumps:
        print(f"no field dumps in {args.out}", file=sys.stderr)
        return 1
    states = []
    for path in dumps:
        m = re.search(r"fields_(\d+)\.csv$", path)
        if not m:
            continue
        step = int(m.group(1))
        fields = read_fields_csv(path, problem.params.N)
        states.append((step, state_from_fields(fields, time=step * tau)))
    states.sort(key=lambda t: t[0])

    records = []
    prev_step, prev_state = states[0]
    records.append(diagnose_pair(prev_step, prev_state, prev_state, problem))
    for step, st in states[1:]:
        dt = (step - prev_step) * tau
        pair_problem = problem
        if abs(dt - tau) > 1e-15:
            # pair-based terms are evaluated at the dump spacing
            from .state import Problem
            pair_problem = Problem.build(
                problem.params.with_(tau=dt), problem.closures, problem.grid)
        records.append(diagnose_pair(step, st, prev_state, pair_problem))
        prev_step, prev_state = step, st
    out_path = os.path.join(args.out, "diagnostics_recomputed.csv")
    write_diagnostics_csv(out_path, records, problem.params.N)
    print(f"ok: wrote {out_path} ({len(records)} rows)")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    from .config import ConfigError

    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "validate":
            return cmd_validate(args)
        if args.command == "diagnose":
            return cmd_diagnose(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
