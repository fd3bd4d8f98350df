"""Time stepping: damped Newton with homotopy continuation and Picard fallback.

Each implicit Euler step solves the coupled nonlinear system in (z, w) by
Newton with Armijo backtracking.  On stall, a homotopy walks the physics
weight sigma from 0 (where z = w = 0 solves the step exactly) up to 1,
warm-starting each rung.  If that also fails and the lower-order
regularization is active, Picard sweeps solve the frozen-coefficient inner
problems (linear per species, monotone scalar in w) before a final Newton
polish.
"""
from __future__ import annotations

import time as _time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import Assembler, pack, unpack
from .diagnostics import DiagnosticsRecord, diagnose_pair, entropy_production_field
from .state import EntropyState, Problem


@dataclass
class SolverOptions:
    newton_tol: float = 1e-10
    max_newton: int = 30
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    min_step: float = 2.0 ** -20
    homotopy_steps: Tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    picard_max: int = 40
    check_invariants: bool = True
    production_floor: float = -1e-12


@dataclass
class StepReport:
    newton_iterations: int = 0
    final_residual: float = np.inf
    homotopy_path_used: bool = False
    picard_sweeps: int = 0
    wallclock: float = 0.0
    converged: bool = False
    residual_scale: float = 1.0


class StepFailure(RuntimeError):
    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InvariantViolation(RuntimeError):
    def __init__(self, message: str, record: Optional[DiagnosticsRecord] = None):
        super().__init__(message)
        self.record = record


def _residual_norm(R) -> float:
    if R is None or not np.all(np.isfinite(R)):
        return np.inf
    return float(np.max(np.abs(R)))


class Stepper:
    def __init__(self, problem: Problem, opts: Optional[SolverOptions] = None):
        self.problem = problem
        self.opts = opts or SolverOptions()
        self.asm = Assembler(problem)

    @property
    def _tol(self) -> float:
        return self.opts.newton_tol * getattr(self.asm, "res_scale", 1.0)

    # -- one damped Newton iteration (exposed for tests and diagnostics)
    def newton_step(self, z, w, sigma=1.0):
        """Single damped Newton update; returns (z, w, new_residual_norm, step_len)."""
        asm = self.asm
        opts = self.opts
        with np.errstate(all="ignore"):
            R, J, _ = asm.residual_and_jacobian(z, w, sigma)
        r0 = _residual_norm(R)
        if r0 <= self._tol:
            return z, w, r0, 0.0
        dU = spla.spsolve(J.tocsc(), -R)
        if not np.all(np.isfinite(dU)):
            raise StepFailure("linear solve produced non-finite Newton update")
        U = pack(z, w)
        t = 1.0
        while t >= opts.min_step:
            zt, wt = unpack(U + t * dU, self.problem.params.N)
            with np.errstate(all="ignore"):
                try:
                    Rt, _ = asm.residual(zt, wt, sigma)
                    rt = _residual_norm(Rt)
                except (FloatingPointError, ValueError):
                    rt = np.inf
            if rt <= (1.0 - opts.armijo_c * t) * r0:
                return zt, wt, rt, t
            t *= opts.backtrack_factor
        raise StepFailure("Newton line search failed",
                          {"residual": r0, "sigma": sigma})

    def _newton_solve(self, z, w, sigma):
        opts = self.opts
        with np.errstate(all="ignore"):
            try:
                R, _ = self.asm.residual(z, w, sigma)
                r = _residual_norm(R)
            except (FloatingPointError, ValueError):
                r = np.inf
        its = 0
        while r > self._tol:
            if its >= opts.max_newton or not np.isfinite(r):
                return z, w, r, its, False
            try:
                z, w, r, _ = self.newton_step(z, w, sigma)
            except StepFailure:
                return z, w, r, its, False  # stall; caller may try a fallback
            its += 1
        return z, w, r, its, True

    # -- Picard inner problems mirroring the linearized fixed-point map
    def _picard_sweeps(self, z, w, sigma):
        pr = self.problem.params
        opts = self.opts
        if pr.eps <= 0.0:
            return z, w, np.inf, 0
        N = pr.N
        lap = self.asm.lap
        M = self.problem.grid.ncells
        A_mass = (pr.eps * (sp.identity(M, format="csr") - lap)).tocsc()
        if pr.delta > 0.0:
            A_mass = (A_mass + pr.delta * self.asm.lap2).tocsc()
        mass_lu = spla.splu(A_mass)

        best = (z, w, np.inf)
        sweeps = 0
        for sweeps in range(1, opts.picard_max + 1):
            with np.errstate(all="ignore"):
                try:
                    R1, _ = self.asm.residual(z, w, sigma)
                    R0, _ = self.asm.residual(z, w, 0.0)
                except (FloatingPointError, ValueError):
                    break
            r1 = _residual_norm(R1)
            if r1 < best[2]:
                best = (z.copy(), w.copy(), r1)
            if r1 <= self._tol:
                return z, w, r1, sweeps
            phys = (R1 - R0).reshape(M, N + 1)
            z_new = np.column_stack([
                mass_lu.solve(-phys[:, i]) for i in range(N)])
            w_new = self._solve_w_inner(w, np.exp(w), -phys[:, N])
            if not (np.all(np.isfinite(z_new)) and np.all(np.isfinite(w_new))):
                break
            # the raw fixed-point map need not contract; damp on residual decrease
            theta = 1.0
            accepted = False
            while theta >= 1.0 / 64.0:
                z_t = z + theta * (z_new - z)
                w_t = w + theta * (w_new - w)
                with np.errstate(all="ignore"):
                    try:
                        R_t, _ = self.asm.residual(z_t, w_t, sigma)
                        r_t = _residual_norm(R_t)
                    except (FloatingPointError, ValueError):
                        r_t = np.inf
                if r_t < r1:
                    z, w = z_t, w_t
                    accepted = True
                    break
                theta *= 0.5
            if not accepted:
                break
        zb, wb, rb = best
        return zb, wb, rb, sweeps

    def _solve_w_inner(self, w0, T_star, rhs):
        """Monotone frozen-coefficient problem in w from the inner linearization."""
        from .operators import face_mean
        pr = self.problem.params
        g = self.problem.grid
        lap = self.asm.lap
        a, b = g.face_left, g.face_right
        h = g.face_h
        fw = g.face_area / g.cell_volume
        c1 = 1.0 + T_star
        cK3 = T_star ** (-pr.K3)
        c1bar = face_mean(g, c1)
        cK3bar = face_mean(g, cK3)

        def wdg_matrix(alpha):
            # SPD matrix of -div(alpha grad .)
            cvals = alpha * fw / h
            rows = np.concatenate([a, a, b, b])
            cols = np.concatenate([a, b, b, a])
            vals = np.concatenate([cvals, -cvals, cvals, -cvals])
            return sp.csr_matrix((vals, (rows, cols)), shape=(g.ncells, g.ncells))

        A_const = pr.eps * (wdg_matrix(c1bar) + sp.diags(1.0 + cK3))
        if pr.delta > 0.0:
            A_const = A_const + pr.delta * (lap @ sp.diags(c1) @ lap)

        def G(wv):
            gwv = (wv[b] - wv[a]) / h
            out = A_const @ wv
            flux = pr.eps * cK3bar * np.abs(gwv) ** (pr.K3 - 1.0) * gwv
            if pr.delta > 0.0:
                flux = flux + pr.delta * c1bar * gwv ** 3
            wre = flux * fw
            np.subtract.at(out, a, wre)
            np.add.at(out, b, wre)
            return out - rhs

        wv = w0.copy()
        for _ in range(60):
            res = G(wv)
            rn = _residual_norm(res)
            if rn <= self._tol:
                break
            gwv = (wv[b] - wv[a]) / h
            coef = pr.eps * cK3bar * pr.K3 * np.abs(gwv) ** (pr.K3 - 1.0)
            if pr.delta > 0.0:
                coef = coef + pr.delta * 3.0 * c1bar * gwv ** 2
            Jw = (A_const + wdg_matrix(coef)).tocsc()
            dw = spla.spsolve(Jw, -res)
            t = 1.0
            while t >= self.opts.min_step:
                rn_t = _residual_norm(G(wv + t * dw))
                if rn_t < rn:
                    wv = wv + t * dw
                    break
                t *= 0.5
            else:
                break
        return wv

    # -- the full step
    def step(self, state_km1: EntropyState) -> Tuple[EntropyState, StepReport]:
        pr = self.problem.params
        opts = self.opts
        t0 = _time.perf_counter()
        self.asm.begin_step(state_km1)
        report = StepReport(residual_scale=self.asm.res_scale)

        z, w, r, its, ok = self._newton_solve(state_km1.z.copy(),
                                              state_km1.w.copy(), 1.0)
        report.newton_iterations = its

        if not ok and (pr.eps > 0.0 or pr.delta > 0.0):
            report.homotopy_path_used = True
            zh = np.zeros_like(state_km1.z)
            wh = np.zeros_like(state_km1.w)
            # z = w = 0 solves the sigma = 0 problem exactly; walk the ladder,
            # bisecting any rung the warm-started Newton cannot reach
            targets = [s for s in opts.homotopy_steps if s > 0.0]
            sigma_prev = 0.0
            r_h = np.inf
            ok_h = True
            attempts = 0
            while targets and attempts < 64:
                attempts += 1
                sigma = targets[0]
                z_t, w_t, r_t, its_h, ok_rung = self._newton_solve(
                    zh.copy(), wh.copy(), sigma)
                report.newton_iterations += its_h
                if ok_rung:
                    zh, wh, r_h = z_t, w_t, r_t
                    sigma_prev = sigma
                    targets.pop(0)
                else:
                    mid = 0.5 * (sigma_prev + sigma)
                    if mid - sigma_prev < 1.0 / 256.0:
                        ok_h = False
                        break
                    targets.insert(0, mid)
            ok_h = ok_h and not targets
            if ok_h:
                z, w, r, ok = zh, wh, r_h, True

        if not ok and pr.eps > 0.0:
            zp, wp, r_p, sweeps = self._picard_sweeps(
                state_km1.z.copy(), state_km1.w.copy(), 1.0)
            report.picard_sweeps = sweeps
            zp, wp, r_p, its_p, ok = self._newton_solve(zp, wp, 1.0)
            report.newton_iterations += its_p
            if ok:
                z, w, r = zp, wp, r_p

        report.final_residual = r
        report.converged = ok
        report.wallclock = _time.perf_counter() - t0
        if not ok:
            raise StepFailure(
                f"time step failed to converge (residual {r:.3e} after "
                f"{report.newton_iterations} Newton iterations, "
                f"homotopy={report.homotopy_path_used}, "
                f"picard={report.picard_sweeps})",
                {"residual": r, "time": state_km1.time},
            )

        # recover the eliminated saturation of the accepted step
        from .state import eliminate
        cf = eliminate(z, w, state_km1.S, 1.0, self.problem,
                       need_derivatives=False)
        state_k = EntropyState(z=z, w=w, S=cf.S, time=state_km1.time + pr.tau)
        return state_k, report


def time_step(state_km1: EntropyState, problem: Problem,
              opts: Optional[SolverOptions] = None):
    """One implicit Euler step (convenience wrapper around Stepper)."""
    return Stepper(problem, opts).step(state_km1)


# ---------------------------------------------------------------------------
# simulation driver


@dataclass
class Trajectory:
    states: List[EntropyState] = field(default_factory=list)
    dump_steps: List[int] = field(default_factory=list)
    records: List[DiagnosticsRecord] = field(default_factory=list)
    reports: List[StepReport] = field(default_factory=list)


def _check_invariants(record: DiagnosticsRecord, prod, problem: Problem,
                      opts: SolverOptions, prev_lyapunov: float,
                      isolated: bool, eps_floor_active: bool,
                      scale: float = 1.0) -> List[str]:
    pr = problem.params
    tol_budget = 10.0 * opts.newton_tol * max(1.0, problem.grid.total_volume) * scale
    bad: List[str] = []
    if not np.isfinite(record.T_min) or record.T_min <= 0.0 or record.rho_min <= 0.0:
        bad.append("positivity: nonpositive density or temperature")
    if eps_floor_active and record.sat_min < pr.eps - 1e-12:
        bad.append(f"saturation floor: min S = {record.sat_min:.6g} < eps = {pr.eps}")
    if abs(record.energy_residual) > tol_budget:
        bad.append(f"energy budget residual {record.energy_residual:.3e} "
                   f"exceeds {tol_budget:.1e}")
    if max(abs(m) for m in record.mass_residual) > tol_budget:
        bad.append("mass budget residual exceeds tolerance")
    for name in ("darcy", "onsager", "fourier", "dyncap", "reaction"):
        term = getattr(prod, name)
        floor = opts.production_floor * max(1.0, float(np.max(np.abs(term), initial=0.0)))
        if float(np.min(term, initial=0.0)) < floor:
            bad.append(f"entropy production term '{name}' went negative: "
                       f"{float(np.min(term)):.3e}")
    if isolated and record.lyapunov > prev_lyapunov + tol_budget:
        bad.append(
            f"entropy-energy functional increased: {prev_lyapunov:.12e} -> "
            f"{record.lyapunov:.12e}")
    return bad


def run_simulation(initial: EntropyState, problem: Problem,
                   opts: Optional[SolverOptions] = None,
                   horizon: float = 1.0, dump_every: int = 0,
                   on_step=None) -> Trajectory:
    """Advance horizon/tau implicit Euler steps, recording diagnostics.

    Invariant assertions (positivity, saturation floor, budget closure,
    entropy production signs, Lyapunov monotonicity for isolated runs) raise
    InvariantViolation when ``opts.check_invariants`` is set.  States are
    kept at the dump cadence plus the initial and final step.
    """
    opts = opts or SolverOptions()
    pr = problem.params
    L = int(round(horizon / pr.tau))
    if abs(L * pr.tau - horizon) > 1e-9 * max(1.0, abs(horizon)):
        raise ValueError(
            f"horizon {horizon} is not an integer multiple of tau {pr.tau}")

    isolated = pr.alpha == 0.0 and not problem.has_b
    eps_bound = problem.closures.sat_floor_bound(pr.p_at)
    eps_floor_active = 0.0 < pr.eps < eps_bound

    traj = Trajectory()
    stepper = Stepper(problem, opts)
    state = initial
    rec0 = diagnose_pair(0, state, state, problem)
    # budget identities are per-step quantities; blank them on the initial row
    rec0.energy_residual = 0.0
    rec0.mass_residual = tuple(0.0 for _ in rec0.mass_residual)
    rec0.monitors["entropy_balance_residual"] = 0.0
    traj.records.append(rec0)
    traj.states.append(state.copy())
    traj.dump_steps.append(0)
    prev_lyap = rec0.lyapunov

    for k in range(1, L + 1):
        state_new, report = stepper.step(state)
        record = diagnose_pair(k, state_new, state, problem)
        prod = entropy_production_field(state_new, state, problem)
        if opts.check_invariants:
            bad = _check_invariants(record, prod, problem, opts, prev_lyap,
                                    isolated, eps_floor_active,
                                    scale=report.residual_scale)
            if bad:
                raise InvariantViolation(
                    f"step {k}: " + "; ".join(bad), record)
        traj.records.append(record)
        traj.reports.append(report)
        prev_lyap = record.lyapunov
        if (dump_every and k % dump_every == 0) or k == L:
            traj.states.append(state_new.copy())
            traj.dump_steps.append(k)
        if on_step is not None:
            on_step(k, state_new, record, report)
        state = state_new
    return traj
