"""Bit-stable field and diagnostics output.

Floats are serialized with 17 significant digits so CSV round-trips
reproduce fields bitwise.  The VTK writer emits legacy structured-points
files (cell-centered values exported as point data on the center lattice),
which standard viewers open directly.
"""
from __future__ import annotations

import csv
import os
from typing import Dict, Iterable, List

import numpy as np

from .diagnostics import DiagnosticsRecord
from .state import EntropyState, Problem, derive_fields

FLOAT_FMT = "{:.17g}"


def _fmt(x) -> str:
    return FLOAT_FMT.format(float(x))


def field_columns(N: int, dim: int) -> List[str]:
    cols = ["cell"] + ["x", "y"][:dim]
    cols += [f"rho_{i + 1}" for i in range(N)]
    cols += ["T", "S", "p"]
    cols += [f"mu_{i + 1}" for i in range(N)]
    return cols


def write_fields_csv(path: str, state: EntropyState, problem: Problem) -> None:
    N = problem.params.N
    g = problem.grid
    f = derive_fields(state, problem)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(field_columns(N, g.dim))
        for c in range(g.ncells):
            row: List[str] = [str(c)]
            row += [_fmt(x) for x in g.cell_centers[c]]
            row += [_fmt(f.rho[c, i]) for i in range(N)]
            row += [_fmt(f.T[c]), _fmt(state.S[c]), _fmt(f.p[c])]
            row += [_fmt(f.mu[c, i]) for i in range(N)]
            wr.writerow(row)


def read_fields_csv(path: str, N: int) -> Dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        rows = [r for r in rd]
    idx = {name: k for k, name in enumerate(header)}
    M = len(rows)
    rho = np.empty((M, N))
    T = np.empty(M)
    S = np.empty(M)
    p = np.empty(M)
    mu = np.empty((M, N))
    for r, row in enumerate(rows):
        for i in range(N):
            rho[r, i] = float(row[idx[f"rho_{i + 1}"]])
            mu[r, i] = float(row[idx[f"mu_{i + 1}"]])
        T[r] = float(row[idx["T"]])
        S[r] = float(row[idx["S"]])
        p[r] = float(row[idx["p"]])
    return {"rho": rho, "T": T, "S": S, "p": p, "mu": mu}


def write_fields_vtk(path: str, state: EntropyState, problem: Problem) -> None:
    """Legacy VTK structured points; one SCALARS block per field."""
    g = problem.grid
    N = problem.params.N
    f = derive_fields(state, problem)
    if g.dim == 1:
        dims = (g.cells_per_axis[0], 1, 1)
        spacing = (g.spacing[0], 1.0, 1.0)
        origin = (0.5 * g.spacing[0], 0.0, 0.0)
    else:
        dims = (g.cells_per_axis[0], g.cells_per_axis[1], 1)
        spacing = (g.spacing[0], g.spacing[1], 1.0)
        origin = (0.5 * g.spacing[0], 0.5 * g.spacing[1], 0.0)

    # our flat index is x-major; VTK expects x fastest, so transpose on write
    def vtk_order(vals: np.ndarray) -> np.ndarray:
        if g.dim == 1:
            return vals
        return vals.reshape(g.cells_per_axis[0], g.cells_per_axis[1]).T.ravel()

    fields = {f"rho_{i + 1}": f.rho[:, i] for i in range(N)}
    fields.update({"T": f.T, "S": state.S, "p": f.p})
    fields.update({f"mu_{i + 1}": f.mu[:, i] for i in range(N)})

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"thermorichards fields t={_fmt(state.time)}\n")
        fh.write("ASCII\nDATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {dims[0]} {dims[1]} {dims[2]}\n")
        fh.write(f"ORIGIN {_fmt(origin[0])} {_fmt(origin[1])} {_fmt(origin[2])}\n")
        fh.write(f"SPACING {_fmt(spacing[0])} {_fmt(spacing[1])} {_fmt(spacing[2])}\n")
        fh.write(f"POINT_DATA {g.ncells}\n")
        for name, vals in fields.items():
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            fh.write("\n".join(_fmt(v) for v in vtk_order(vals)))
            fh.write("\n")


def write_fields(state: EntropyState, problem: Problem, base_path: str,
                 formats: Iterable[str]) -> List[str]:
    written = []
    for fmt in formats:
        if fmt == "csv":
            path = base_path + ".csv"
            write_fields_csv(path, state, problem)
        elif fmt == "vtk":
            path = base_path + ".vtk"
            write_fields_vtk(path, state, problem)
        else:
            raise ValueError(f"unknown field format '{fmt}'")
        written.append(path)
    return written


def write_diagnostics_csv(path: str, records: List[DiagnosticsRecord], N: int) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(DiagnosticsRecord.header(N))
        for rec in records:
            row = rec.row()
            wr.writerow([str(row[0])] + [_fmt(x) for x in row[1:]])


def state_from_fields(fields: Dict[str, np.ndarray], time: float = 0.0) -> EntropyState:
    """Rebuild an entropy-variable state from a stored field dump."""
    T = fields["T"]
    z = fields["mu"] / T[:, None]
    return EntropyState(z=z, w=np.log(T), S=fields["S"].copy(), time=time)


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
