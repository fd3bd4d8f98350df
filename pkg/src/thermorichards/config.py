"""Run configuration: one canonical YAML document, strictly validated.

Unknown keys are hard errors (silent default drift is the main
reproducibility hazard in solver configs), every run validates the closure
hypotheses before starting, and the saturation-floor guard on eps is
enforced at load time.  ``parse_config('')`` yields the full documented
default configuration.
"""
from __future__ import annotations

import copy
import io
from dataclasses import dataclass
from typing import Any, Dict, List

import numpy as np
import yaml

from .closures import (ClosureSet, ConstantPorosity, ConstantViscosity,
                       LogOneMinusF, PowerKappa, PowerKr, PowerPc,
                       ProjectorOnsager, ProjectorPowerReactions,
                       ZeroReactions, projector)
from .grid import Grid, make_grid
from .hypotheses import validate_hypotheses
from .params import ModelParams
from .solver import SolverOptions
from .state import EntropyState, Problem, state_from_primitives


class ConfigError(ValueError):
    pass


def default_config() -> Dict[str, Any]:
    return {
        "model": {
            "species": 1,
            "gamma": 3.0,
            "c_w": 1.0,
            "c_s": 1.0,
            "p_at": 2.5,
            "permeability": 1.0,
            "robin_alpha": 0.0,
            "T0": 1.0,
            "mu0": [0.0],
            "reaction_exponent": 3.0,
        },
        "closures": {
            "kr": {"kind": "power", "alpha_r": 2.0},
            "pc": {"kind": "power", "c_p": 1.0, "k_p": 2.0},
            "f": {"kind": "log1m", "A": 4.0, "B": 1.0},
            "viscosity": {"kind": "constant", "value": 1.0},
            "kappa": {"kind": "power1p", "kappa1": 1.0, "beta": 4.0},
            "onsager": {"kind": "projector", "D": 1.0, "c0": 0.0},
            "reactions": {"kind": "projector_power", "C1": 1.0},
            "b": {"kind": "projector", "beta_b": 0.0},
            "phi": {"kind": "constant", "value": 0.3},
        },
        "grid": {
            "dim": 1,
            "cells": [200],
            "extent": [1.0],
        },
        "scheme": {
            "tau": 0.01,
            "eps": 0.01,
            "delta": 0.0,
            "K1": 5.0,
            "K2": 6.0,
            "K3": 7.0,
            "q": 1.5,
            "newton_tol": 1.0e-10,
            "max_newton": 30,
            "homotopy_steps": [0.0, 0.25, 0.5, 0.75, 1.0],
            "picard_max": 40,
            "damping": {
                "factor": 0.5,
                "min_step": 2.0 ** -20,
                "armijo_c": 1.0e-4,
            },
        },
        "initial": {
            "kind": "constant",
            "rho": [0.285],
            "T": 1.0,
            "S": 0.68,
            "bump_rho": 0.0,
            "bump_T": 0.0,
            "bump_S": 0.0,
            "bump_center": [0.5],
            "bump_width": 0.1,
            "noise": 0.0,
            "file": "",
        },
        "output": {
            "directory": "out",
            "cadence": 10,
            "formats": ["csv"],
        },
        "run": {
            "horizon": 1.0,
            "seed": 0,
            "threads": 1,
        },
        "sweep": {
            "mode": "nested",
            "tau": [],
            "eps": [],
            "delta": [],
        },
    }


def _merge_strict(base: Dict[str, Any], user: Dict[str, Any], path: str = "") -> None:
    for key, val in user.items():
        here = f"{path}.{key}" if path else str(key)
        if key not in base:
            raise ConfigError(f"unknown configuration key '{here}'")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"'{here}' must be a mapping")
            _merge_strict(base[key], val, here)
        else:
            base[key] = val


def parse_config(text: str) -> "RunConfig":
    """Parse and validate a YAML configuration; empty text gives the defaults."""
    try:
        user = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"config parse error{loc}: {exc}") from exc
    if user is None:
        user = {}
    if not isinstance(user, dict):
        raise ConfigError("top-level configuration must be a mapping")
    cfg = default_config()
    _merge_strict(cfg, user)
    rc = RunConfig(cfg)
    rc.validate()
    return rc


def load_config(path: str) -> "RunConfig":
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def serialize_config(cfg: Dict[str, Any]) -> str:
    buf = io.StringIO()
    yaml.safe_dump(cfg, buf, default_flow_style=False, sort_keys=True)
    return buf.getvalue()


@dataclass
class RunConfig:
    """A validated configuration plus builders for every solver object."""

    data: Dict[str, Any]

    def serialize(self) -> str:
        return serialize_config(self.data)

    # ------------------------------------------------------------- builders
    def params(self) -> ModelParams:
        m = self.data["model"]
        s = self.data["scheme"]
        c = self.data["closures"]
        N = int(m["species"])
        mu0_arr = np.atleast_1d(np.asarray(m["mu0"], dtype=float))
        if mu0_arr.size == 1:
            mu0 = [float(mu0_arr[0])] * N
        elif mu0_arr.size == N:
            mu0 = [float(x) for x in mu0_arr]
        else:
            raise ConfigError("model.mu0 must have one entry per species")
        return ModelParams(
            N=N, gamma=float(m["gamma"]), c_w=float(m["c_w"]), c_s=float(m["c_s"]),
            p_at=float(m["p_at"]), K=float(m["permeability"]),
            alpha=float(m["robin_alpha"]), T0=float(m["T0"]), mu0=tuple(mu0),
            eps=float(s["eps"]), delta=float(s["delta"]), tau=float(s["tau"]),
            K1=float(s["K1"]), K2=float(s["K2"]), K3=float(s["K3"]),
            a=float(m["reaction_exponent"]),
            alpha_r=float(c["kr"]["alpha_r"]), beta=float(c["kappa"]["beta"]),
            q=float(s["q"]), k_p=float(c["pc"]["k_p"]), c_p=float(c["pc"]["c_p"]),
        )

    def closures(self, params: ModelParams | None = None) -> ClosureSet:
        params = params or self.params()
        c = self.data["closures"]
        N = params.N

        def pick(block, table, what):
            kind = block.get("kind")
            if kind not in table:
                raise ConfigError(f"unknown {what} closure kind '{kind}'")
            return table[kind](block)

        kr = pick(c["kr"], {"power": lambda b: PowerKr(float(b["alpha_r"]))}, "kr")
        pc = pick(c["pc"], {"power": lambda b: PowerPc(float(b["c_p"]),
                                                       float(b["k_p"]))}, "pc")
        f = pick(c["f"], {"log1m": lambda b: LogOneMinusF(float(b["A"]),
                                                          float(b["B"]))}, "f")
        visc = pick(c["viscosity"],
                    {"constant": lambda b: ConstantViscosity(float(b["value"]))},
                    "viscosity")
        kappa = pick(c["kappa"],
                     {"power1p": lambda b: PowerKappa(float(b["kappa1"]),
                                                      float(b["beta"]))}, "kappa")
        ons = pick(c["onsager"],
                   {"projector": lambda b: ProjectorOnsager(
                       N, D=float(b["D"]), c0=float(b["c0"]))}, "onsager")
        reac = pick(c["reactions"], {
            "projector_power": lambda b: ProjectorPowerReactions(
                N, C1=float(b["C1"]), a=params.a),
            "zero": lambda b: ZeroReactions(N),
        }, "reactions")
        bkind = c["b"].get("kind")
        if bkind == "projector":
            b_mat = float(c["b"]["beta_b"]) * projector(N)
        elif bkind == "identity":
            b_mat = np.eye(N)
        else:
            raise ConfigError(f"unknown b closure kind '{bkind}'")
        phi = pick(c["phi"],
                   {"constant": lambda b: ConstantPorosity(float(b["value"]))},
                   "phi")
        return ClosureSet(kr=kr, pc=pc, f=f, viscosity=visc, kappa=kappa,
                          onsager=ons, reactions=reac, b=b_mat, phi=phi)

    def grid(self) -> Grid:
        g = self.data["grid"]
        return make_grid(int(g["dim"]), g["cells"], g["extent"])

    def problem(self) -> Problem:
        params = self.params()
        return Problem.build(params, self.closures(params), self.grid())

    def solver_options(self) -> SolverOptions:
        s = self.data["scheme"]
        d = s["damping"]
        return SolverOptions(
            newton_tol=float(s["newton_tol"]),
            max_newton=int(s["max_newton"]),
            armijo_c=float(d["armijo_c"]),
            backtrack_factor=float(d["factor"]),
            min_step=float(d["min_step"]),
            homotopy_steps=tuple(float(x) for x in s["homotopy_steps"]),
            picard_max=int(s["picard_max"]),
        )

    # ------------------------------------------------------------ validation
    def validate(self) -> None:
        try:
            params = self.params()
            params.check()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        closures = self.closures(params)
        report = validate_hypotheses(params, closures)
        if not report.passed:
            names = ", ".join(report.failed_names())
            detail = "\n".join(f"  {c.name}: {c.detail}" for c in report.failures())
            raise ConfigError(
                f"configuration violates hypotheses: {names}\n{detail}")
        if params.eps > 0.0:
            bound = closures.sat_floor_bound(params.p_at)
            if params.eps >= bound:
                raise ConfigError(
                    f"scheme.eps = {params.eps} must stay below the saturation "
                    f"floor bound f^-1(p_at/lambda0) = {bound:.6g}")
        ic = self.data["initial"]
        if ic["kind"] not in ("constant", "gaussian", "file"):
            raise ConfigError(f"unknown initial condition kind '{ic['kind']}'")
        if self.data["sweep"]["mode"] not in ("nested", "cartesian"):
            raise ConfigError("sweep.mode must be 'nested' or 'cartesian'")
        for fmt in self.data["output"]["formats"]:
            if fmt not in ("csv", "vtk"):
                raise ConfigError(f"unknown output format '{fmt}'")

    # ------------------------------------------------------- initial state
    def initial_state(self, problem: Problem, seed: int | None = None) -> EntropyState:
        ic = self.data["initial"]
        pr = problem.params
        g = problem.grid
        M = g.ncells
        rho_arr = np.atleast_1d(np.asarray(ic["rho"], dtype=float))
        if rho_arr.size == 1:
            rho_base = np.full(pr.N, float(rho_arr[0]))
        elif rho_arr.size == pr.N:
            rho_base = rho_arr.astype(float)
        else:
            raise ConfigError("initial.rho must have one entry per species")
        rho = np.tile(rho_base, (M, 1))
        T = np.full(M, float(ic["T"]))
        S = np.full(M, float(ic["S"]))

        if ic["kind"] == "gaussian":
            center = np.asarray(ic["bump_center"], dtype=float)[: g.dim]
            width = float(ic["bump_width"])
            d2 = np.sum((g.cell_centers - center[None, :]) ** 2, axis=1)
            bump = np.exp(-0.5 * d2 / width ** 2)
            rho = rho * (1.0 + float(ic["bump_rho"]) * bump)[:, None]
            T = T * (1.0 + float(ic["bump_T"]) * bump)
            S = S + float(ic["bump_S"]) * bump
            noise = float(ic["noise"])
            if noise > 0.0:
                rng = np.random.default_rng(
                    seed if seed is not None else int(self.data["run"]["seed"]))
                rho = rho * (1.0 + noise * rng.standard_normal(rho.shape))
                T = T * (1.0 + noise * rng.standard_normal(M))
                S = S + noise * rng.standard_normal(M)
        elif ic["kind"] == "file":
            from .fields_io import read_fields_csv
            fields = read_fields_csv(ic["file"], pr.N)
            if fields["rho"].shape[0] != M:
                raise ConfigError(
                    "initial-condition file does not match the grid size")
            rho, T, S = fields["rho"], fields["T"], fields["S"]

        return state_from_primitives(rho, T, np.clip(S, 1e-9, 1 - 1e-9), problem)
