"""Parameter sweeps over (delta, tau, eps) with budget and Lyapunov summaries.

The "nested" mode sweeps one parameter at a time in the order delta, tau,
eps (the order in which the regularizations are meant to vanish), each
ladder holding the other two at their base value; "cartesian" runs the full
product.  Points run in a process pool; every point writes its own output
directory, and tau ladders get an observed temporal order computed against
the finest-tau member as reference.
"""
from __future__ import annotations

import copy
import csv
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Tuple

import numpy as np

FLOAT_FMT = "{:.17g}"

SUMMARY_COLS = [
    "point", "eps", "tau", "delta", "steps", "final_lyapunov",
    "max_energy_residual", "max_mass_residual", "sat_min", "entropy_production_total",
    "newton_iterations", "wallclock", "observed_order_tau",
]


def sweep_points(cfg: Dict[str, Any]) -> List[Dict[str, float]]:
    sw = cfg["sweep"]
    base = {
        "eps": float(cfg["scheme"]["eps"]),
        "tau": float(cfg["scheme"]["tau"]),
        "delta": float(cfg["scheme"]["delta"]),
    }
    taus = [float(x) for x in sw["tau"]] or [base["tau"]]
    epss = [float(x) for x in sw["eps"]] or [base["eps"]]
    deltas = [float(x) for x in sw["delta"]] or [base["delta"]]

    points: List[Dict[str, float]] = []
    if sw["mode"] == "cartesian":
        for e in epss:
            for t in taus:
                for d in deltas:
                    points.append({"eps": e, "tau": t, "delta": d})
    else:  # nested: one ladder at a time, in the order delta, tau, eps
        for d in deltas:
            points.append({"eps": base["eps"], "tau": base["tau"], "delta": d})
        for t in taus:
            points.append({"eps": base["eps"], "tau": t, "delta": base["delta"]})
        for e in epss:
            points.append({"eps": e, "tau": base["tau"], "delta": base["delta"]})
        seen = set()
        unique = []
        for p in points:
            key = (p["eps"], p["tau"], p["delta"])
            if key not in seen:
                seen.add(key)
                unique.append(p)
        points = unique
    return points


def run_point(args: Tuple[Dict[str, Any], Dict[str, float], str, float, int]):
    """Run one sweep point; returns its summary row and final fields."""
    from .config import RunConfig
    from .fields_io import ensure_dir, write_diagnostics_csv, write_fields
    from .solver import run_simulation
    from .state import derive_fields

    cfg_data, point, out_dir, horizon, seed = args
    data = copy.deepcopy(cfg_data)
    data["scheme"]["eps"] = point["eps"]
    data["scheme"]["tau"] = point["tau"]
    data["scheme"]["delta"] = point["delta"]
    rc = RunConfig(data)
    rc.validate()
    problem = rc.problem()
    opts = rc.solver_options()
    state0 = rc.initial_state(problem, seed=seed)

    ensure_dir(out_dir)
    traj = run_simulation(state0, problem, opts, horizon=horizon,
                          dump_every=int(data["output"]["cadence"]))
    write_diagnostics_csv(os.path.join(out_dir, "diagnostics.csv"),
                          traj.records, problem.params.N)
    final = traj.states[-1]
    write_fields(final, problem, os.path.join(out_dir, "fields_final"),
                 data["output"]["formats"])
    ff = derive_fields(final, problem)
    recs = traj.records
    summary = {
        "eps": point["eps"], "tau": point["tau"], "delta": point["delta"],
        "steps": len(recs) - 1,
        "final_lyapunov": recs[-1].lyapunov,
        "max_energy_residual": max(abs(r.energy_residual) for r in recs),
        "max_mass_residual": max(max(abs(m) for m in r.mass_residual) for r in recs),
        "sat_min": min(r.sat_min for r in recs),
        "entropy_production_total": sum(r.entropy_production for r in recs[1:])
        * point["tau"],
        "newton_iterations": sum(r.newton_iterations for r in traj.reports),
        "wallclock": sum(r.wallclock for r in traj.reports),
    }
    fields_final = {"rho": ff.rho, "T": ff.T, "S": final.S}
    return summary, fields_final


def observed_tau_orders(rows: List[Dict[str, Any]],
                        finals: List[Dict[str, np.ndarray]]) -> None:
    """Annotate tau-ladder members with a least-squares convergence order.

    Groups rows sharing (eps, delta); the smallest tau in a group of >= 3 is
    the reference, errors are final-state L2 differences of (rho, T, S).
    """
    groups: Dict[Tuple[float, float], List[int]] = {}
    for k, row in enumerate(rows):
        groups.setdefault((row["eps"], row["delta"]), []).append(k)
    for idxs in groups.values():
        idxs = sorted(idxs, key=lambda k: rows[k]["tau"], reverse=True)
        if len(idxs) < 3:
            continue
        ref = idxs[-1]
        fr = finals[ref]
        errs, taus = [], []
        for k in idxs[:-1]:
            fk = finals[k]
            err = np.sqrt(
                np.sum((fk["rho"] - fr["rho"]) ** 2)
                + np.sum((fk["T"] - fr["T"]) ** 2)
                + np.sum((fk["S"] - fr["S"]) ** 2))
            if err > 0.0:
                errs.append(err)
                taus.append(rows[k]["tau"])
        if len(errs) >= 2:
            slope = np.polyfit(np.log(taus), np.log(errs), 1)[0]
            for k in idxs[:-1]:
                rows[k]["observed_order_tau"] = float(slope)


def run_sweep(cfg_data: Dict[str, Any], out_root: str, horizon: float,
              seed: int, threads: int = 1) -> List[Dict[str, Any]]:
    from .fields_io import ensure_dir
    points = sweep_points(cfg_data)
    ensure_dir(out_root)
    jobs = []
    for k, point in enumerate(points):
        name = (f"point_{k:03d}_eps{point['eps']:g}_tau{point['tau']:g}"
                f"_delta{point['delta']:g}")
        jobs.append((cfg_data, point, os.path.join(out_root, name),
                     horizon, seed))

    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_point, jobs))
    else:
        results = [run_point(j) for j in jobs]

    rows = []
    finals = []
    for k, (summary, fields_final) in enumerate(results):
        summary["point"] = k
        summary["observed_order_tau"] = float("nan")
        rows.append(summary)
        finals.append(fields_final)
    observed_tau_orders(rows, finals)

    with open(os.path.join(out_root, "summary.csv"), "w", newline="",
              encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(SUMMARY_COLS)
        for row in rows:
            wr.writerow([str(row["point"])]
                        + [FLOAT_FMT.format(float(row[c])) for c in SUMMARY_COLS[1:]])
    return rows
