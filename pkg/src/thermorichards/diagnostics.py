"""Discrete transcriptions of the entropy/energy/mass balance identities.

These functions recompute every balance from the states alone (never from
solver internals), so they double as an independent audit of the scheme:
if the assembly or the Newton solve were wrong, the budgets would not close.

Conventions: a "budget residual" is the defect of the corresponding exact
discrete identity, including the eps/delta regularizer bookkeeping; for a
converged step it is bounded by the solver tolerance times the domain
volume.  The entropy balance residual is one-sided: nonnegative up to
solver slack, by the concavity structure of the implicit step.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from types import SimpleNamespace
from typing import Dict, List, Tuple

import numpy as np

from .closures import apply_projector
from .operators import cell_integral, face_mean, grad
from .state import EntropyState, Problem, derive_fields

MONITOR_KEYS = (
    "pc_l1", "p_l1", "rho_lgamma", "srho_lgamma", "sp_l1", "energy_l1",
    "T_l1", "logT_h1", "Tbeta2_h1", "T_lbeta23", "piz_h1", "piz_la",
    "lam_gradp_l2", "fS_w1q", "dtS_diss_l1", "entropy_balance_residual",
)


@dataclass
class DiagnosticsRecord:
    step: int
    time: float
    entropy_production: float
    energy_residual: float
    mass_residual: Tuple[float, ...]
    lyapunov: float
    sat_min: float
    rho_min: float
    T_min: float
    T_max: float
    monitors: Dict[str, float] = field(default_factory=dict)

    @staticmethod
    def header(N: int) -> List[str]:
        cols = ["step", "time", "entropy_production", "energy_residual"]
        cols += [f"mass_residual_{i + 1}" for i in range(N)]
        cols += ["lyapunov", "sat_min", "rho_min", "T_min", "T_max"]
        cols += [f"mon_{k}" for k in MONITOR_KEYS]
        return cols

    def row(self) -> List[float]:
        vals = [self.step, self.time, self.entropy_production, self.energy_residual]
        vals += list(self.mass_residual)
        vals += [self.lyapunov, self.sat_min, self.rho_min, self.T_min, self.T_max]
        vals += [self.monitors.get(k, 0.0) for k in MONITOR_KEYS]
        return vals


def _face_coeffs(fields, state, problem):
    """Face gradients and averaged transport coefficients for one state."""
    g = problem.grid
    cl = problem.closures
    T = fields.T
    invT = 1.0 / T
    z = state.z
    gz = (z[g.face_right] - z[g.face_left]) / g.face_h[:, None]
    gq = grad(g, invT)
    gp = grad(g, fields.p)
    gw = grad(g, np.log(T))
    lam = np.asarray(cl.kr(fields.S), dtype=float) / np.asarray(cl.viscosity(T), dtype=float)
    L00 = np.asarray(cl.kappa(T), dtype=float) * T ** 2
    Lmat = cl.onsager.lmat(fields.rho, T)
    Lbar = 0.5 * (Lmat[g.face_left] + Lmat[g.face_right])
    return SimpleNamespace(
        gz=gz, gq=gq, gp=gp, gw=gw,
        lambar=face_mean(g, lam), invTbar=face_mean(g, invT),
        L00bar=face_mean(g, L00), Lbar=Lbar, invT=invT, lam=lam,
    )


def entropy_production_field(state_k: EntropyState, state_km1: EntropyState,
                             problem: Problem):
    """Per-cell entropy production, split into its five nonnegative terms.

    Gradient-driven terms are formed on faces (where the scheme's quadratic
    structure lives) and scattered to adjacent cells; the dynamic-capillarity
    and reaction terms are cell-local.  Under the hypotheses every term is
    pointwise nonnegative, which the diagnostics assert at run time.
    """
    from .operators import face_to_cells
    pr = problem.params
    g = problem.grid
    fk = derive_fields(state_k, problem)
    fc = _face_coeffs(fk, state_k, problem)

    darcy_f = pr.K * fc.lambar * fc.invTbar * fc.gp ** 2
    onsager_f = np.einsum("fij,fi,fj->f", fc.Lbar, fc.gz, fc.gz)
    fourier_f = fc.L00bar * fc.gq ** 2

    darcy = face_to_cells(g, darcy_f)
    onsager = face_to_cells(g, onsager_f)
    fourier = face_to_cells(g, fourier_f)

    dS = (state_k.S - state_km1.S) / pr.tau
    fprime = np.asarray(problem.closures.f.prime(state_k.S), dtype=float)
    dyncap = -problem.phi * fc.invT * fprime * dS ** 2

    zeta = apply_projector(state_k.z)
    r = problem.closures.reactions(fk.rho_tot, fk.T, zeta)
    if pr.eps:
        r = r - pr.eps * np.abs(state_k.z) ** (pr.a - 2.0) * state_k.z
    reaction = -np.einsum("mi,mi->m", r, state_k.z)

    total = darcy + onsager + fourier + dyncap + reaction
    return SimpleNamespace(darcy=darcy, onsager=onsager, fourier=fourier,
                           dyncap=dyncap, reaction=reaction, total=total)


def _entropy_total(fields, state, problem) -> float:
    g = problem.grid
    return cell_integral(g, problem.phi * state.S * fields.rhoeta
                         + (1.0 - problem.phi) * fields.eta_s)


def lyapunov(state: EntropyState, problem: Problem) -> float:
    """The entropy-energy functional; non-increasing for the isolated system."""
    fields = derive_fields(state, problem)
    g = problem.grid
    return cell_integral(
        g,
        problem.phi * (fields.Ef - state.S * fields.rhoeta)
        + (1.0 - problem.phi) * (fields.Es - fields.eta_s))


def energy_budget(state_k: EntropyState, state_km1: EntropyState,
                  problem: Problem) -> float:
    """Residual of the integrated discrete energy balance over one step."""
    pr = problem.params
    g = problem.grid
    fk = derive_fields(state_k, problem)
    fp = derive_fields(state_km1, problem)
    dE = cell_integral(g, problem.phi * (fk.Ef - fp.Ef)
                       + (1.0 - problem.phi) * (fk.Es - fp.Es))
    robin = 0.0
    if pr.alpha > 0.0:
        Tb = fk.T[g.bface_cell]
        robin = pr.alpha * float(np.sum((Tb - pr.T0) * g.bface_area))
    reg = 0.0
    if pr.eps > 0.0:
        reg = pr.eps * cell_integral(
            g, (1.0 + fk.T ** (-pr.K3)) * state_k.w)
    return dE + pr.tau * (robin + reg)


def mass_budget(state_k: EntropyState, state_km1: EntropyState,
                problem: Problem) -> np.ndarray:
    """Residual of the per-species mass balance identity, shape (N,).

    Includes the reaction, boundary and eps zero-order bookkeeping; the
    Laplacian-type regularizers telescope away exactly under the natural
    boundary closure.
    """
    pr = problem.params
    g = problem.grid
    fk = derive_fields(state_k, problem)
    fp = derive_fields(state_km1, problem)
    dM = np.array([
        cell_integral(g, problem.phi * (state_k.S * fk.rho[:, i]
                                        - state_km1.S * fp.rho[:, i]))
        for i in range(pr.N)
    ])
    zeta = apply_projector(state_k.z)
    r = problem.closures.reactions(fk.rho_tot, fk.T, zeta)
    if pr.eps:
        r = r - pr.eps * np.abs(state_k.z) ** (pr.a - 2.0) * state_k.z
    src = np.array([cell_integral(g, r[:, i]) for i in range(pr.N)])
    bnd = np.zeros(pr.N)
    if problem.has_b:
        drive = state_k.z[g.bface_cell] - (problem.mu0 / pr.T0)[None, :]
        fb = drive @ problem.b.T
        bnd = np.sum(fb * g.bface_area[:, None], axis=0)
    reg = np.zeros(pr.N)
    if pr.eps > 0.0:
        reg = pr.eps * np.array([cell_integral(g, state_k.z[:, i])
                                 for i in range(pr.N)])
    return dM + pr.tau * (-src + bnd + reg)


def total_species_mass(state: EntropyState, problem: Problem) -> np.ndarray:
    fields = derive_fields(state, problem)
    return np.array([
        cell_integral(problem.grid, problem.phi * state.S * fields.rho[:, i])
        for i in range(problem.params.N)
    ])


def entropy_balance_residual(state_k: EntropyState, state_km1: EntropyState,
                             problem: Problem) -> float:
    """Entropy gain minus boundary sources, production and regularizer forms.

    Nonnegative up to solver slack: what remains is the concavity gap of the
    implicit time differences plus the discrete chain-rule commutation of
    the convective terms.
    """
    pr = problem.params
    g = problem.grid
    fk = derive_fields(state_k, problem)
    fp = derive_fields(state_km1, problem)
    fc = _face_coeffs(fk, state_k, problem)
    tau = pr.tau
    ah = g.face_area * g.face_h

    dH = (_entropy_total(fk, state_k, problem)
          - _entropy_total(fp, state_km1, problem)) / tau

    # boundary entropy sources
    B = 0.0
    if pr.alpha > 0.0:
        Tb = fk.T[g.bface_cell]
        B += pr.alpha * float(np.sum((pr.T0 - Tb) / Tb * g.bface_area))
    if problem.has_b:
        zb = state_k.z[g.bface_cell]
        drive = zb - (problem.mu0 / pr.T0)[None, :]
        B += float(np.sum(np.einsum("mi,ij,mj->m", zb, problem.b, drive)
                          * g.bface_area))

    # production with the secant dynamic-capillarity term (the exact algebraic
    # quantity produced by the implicit step)
    grad_part = float(np.sum(
        (pr.K * fc.lambar * fc.invTbar * fc.gp ** 2
         + np.einsum("fij,fi,fj->f", fc.Lbar, fc.gz, fc.gz)
         + fc.L00bar * fc.gq ** 2) * ah))
    fS_k = np.asarray(problem.closures.f(state_k.S), dtype=float)
    fS_p = np.asarray(problem.closures.f(state_km1.S), dtype=float)
    dyncap = -cell_integral(g, problem.phi * fc.invT
                            * (state_k.S - state_km1.S) * (fS_k - fS_p)) / tau ** 2
    zeta = apply_projector(state_k.z)
    r = problem.closures.reactions(fk.rho_tot, fk.T, zeta)
    if pr.eps:
        r = r - pr.eps * np.abs(state_k.z) ** (pr.a - 2.0) * state_k.z
    react = -cell_integral(g, np.einsum("mi,mi->m", r, state_k.z))
    P = grad_part + dyncap + react

    # regularizer bookkeeping, exactly as tested with (z, -1/T)
    Q = 0.0
    if pr.eps > 0.0:
        Q += pr.eps * float(np.sum(fc.gz ** 2 * ah[:, None]))
        Q += pr.eps * cell_integral(g, np.sum(state_k.z ** 2, axis=1))
        c1bar = face_mean(g, 1.0 + fk.T)
        cK3 = fk.T ** (-pr.K3)
        cK3bar = face_mean(g, cK3)
        Q += pr.eps * float(np.sum(c1bar * fc.gw * (-fc.gq) * ah))
        Q += pr.eps * float(np.sum(
            cK3bar * np.abs(fc.gw) ** (pr.K3 - 1.0) * fc.gw * (-fc.gq) * ah))
        Q += pr.eps * cell_integral(g, (1.0 + cK3) * state_k.w * (-fc.invT))
    if pr.delta > 0.0:
        lap = problem.lap
        for i in range(pr.N):
            Q += pr.delta * cell_integral(g, (lap @ state_k.z[:, i]) ** 2)
        Lw = lap @ state_k.w
        Q += pr.delta * cell_integral(g, (1.0 + fk.T) * Lw * (lap @ (-fc.invT)))
        c1bar = face_mean(g, 1.0 + fk.T)
        Q += pr.delta * float(np.sum(c1bar * fc.gw ** 3 * (-fc.gq) * ah))

    return dH - B - P - Q


def gibbs_duhem_audit(state: EntropyState, problem: Problem):
    """Max face residual of grad(rho eta) = -sum z_i grad(rho_i) + (1/T) grad(rho e).

    Evaluated in gradient form, so the residual is O(h) on smooth fields.
    """
    g = problem.grid
    fields = derive_fields(state, problem)
    a, b = g.face_left, g.face_right
    h = g.face_h
    d_eta = (fields.rhoeta[b] - fields.rhoeta[a]) / h
    d_rho = (fields.rho[b] - fields.rho[a]) / h[:, None]
    d_e = (fields.rhoe[b] - fields.rhoe[a]) / h
    # chain-rule coefficients taken at the owning cell: first-order residual
    invT = 1.0 / fields.T
    resid = d_eta + np.einsum("fi,fi->f", state.z[a], d_rho) - invT[a] * d_e
    return SimpleNamespace(residual=resid,
                           max_residual=float(np.max(np.abs(resid)) if resid.size else 0.0))


def step_monitors(state_k: EntropyState, state_km1: EntropyState,
                  problem: Problem) -> Dict[str, float]:
    """Per-step spatial norms of the a-priori estimate quantities."""
    pr = problem.params
    g = problem.grid
    cl = problem.closures
    fk = derive_fields(state_k, problem)
    fc = _face_coeffs(fk, state_k, problem)
    ah = g.face_area * g.face_h
    mon: Dict[str, float] = {}

    mon["pc_l1"] = cell_integral(g, np.abs(cl.pc(state_k.S)))
    mon["p_l1"] = cell_integral(g, np.abs(fk.p))
    mon["rho_lgamma"] = cell_integral(g, fk.rho_tot ** pr.gamma) ** (1.0 / pr.gamma)
    mon["srho_lgamma"] = cell_integral(
        g, state_k.S * fk.rho_tot ** pr.gamma) ** (1.0 / pr.gamma)
    mon["sp_l1"] = cell_integral(g, np.abs(state_k.S * fk.p))
    mon["energy_l1"] = cell_integral(
        g, np.abs(problem.phi * fk.Ef + (1.0 - problem.phi) * fk.Es))
    mon["T_l1"] = cell_integral(g, fk.T)
    w = state_k.w
    mon["logT_h1"] = np.sqrt(cell_integral(g, w ** 2)
                             + float(np.sum(grad(g, w) ** 2 * ah)))
    Tb2 = fk.T ** (0.5 * pr.beta)
    mon["Tbeta2_h1"] = np.sqrt(cell_integral(g, Tb2 ** 2)
                               + float(np.sum(grad(g, Tb2) ** 2 * ah)))
    expo = pr.beta + 2.0 / 3.0
    mon["T_lbeta23"] = cell_integral(g, fk.T ** expo) ** (1.0 / expo)
    piz = apply_projector(state_k.z)
    gpz = (piz[g.face_right] - piz[g.face_left]) / g.face_h[:, None]
    mon["piz_h1"] = np.sqrt(cell_integral(g, np.sum(piz ** 2, axis=1))
                            + float(np.sum(gpz ** 2 * ah[:, None])))
    norm_piz = np.linalg.norm(piz, axis=1)
    mon["piz_la"] = cell_integral(g, norm_piz ** pr.a) ** (1.0 / pr.a)
    mon["lam_gradp_l2"] = np.sqrt(float(np.sum(
        fc.lambar * fc.invTbar * fc.gp ** 2 * ah)))
    fS = np.asarray(cl.f(state_k.S), dtype=float)
    gfS = grad(g, fS)
    mon["fS_w1q"] = (cell_integral(g, np.abs(fS) ** pr.q)
                     + float(np.sum(np.abs(gfS) ** pr.q * ah))) ** (1.0 / pr.q)
    dS = (state_k.S - state_km1.S) / pr.tau
    fprime = np.asarray(cl.f.prime(state_k.S), dtype=float)
    mon["dtS_diss_l1"] = cell_integral(g, np.abs(fprime) * fc.invT * dS ** 2)
    mon["entropy_balance_residual"] = entropy_balance_residual(
        state_k, state_km1, problem)
    return mon


def diagnose_pair(step: int, state_k: EntropyState, state_km1: EntropyState,
                  problem: Problem) -> DiagnosticsRecord:
    """Full diagnostics record for one accepted step (or the initial state)."""
    prod = entropy_production_field(state_k, state_km1, problem)
    fields = derive_fields(state_k, problem)
    g = problem.grid
    return DiagnosticsRecord(
        step=step,
        time=state_k.time,
        entropy_production=cell_integral(g, prod.total),
        energy_residual=energy_budget(state_k, state_km1, problem),
        mass_residual=tuple(mass_budget(state_k, state_km1, problem)),
        lyapunov=lyapunov(state_k, problem),
        sat_min=float(np.min(state_k.S)),
        rho_min=float(np.min(fields.rho)),
        T_min=float(np.min(fields.T)),
        T_max=float(np.max(fields.T)),
        monitors=step_monitors(state_k, state_km1, problem),
    )


def apriori_monitors(records: List[DiagnosticsRecord], params) -> Dict[str, float]:
    """Aggregate per-step norms into the space-time norms of the a-priori list.

    Reported, not asserted: the constants in the estimates depend on data in
    a way the theory does not make explicit.
    """
    if not records:
        return {}
    tau = params.tau

    def series(key):
        return np.array([r.monitors.get(key, 0.0) for r in records])

    out: Dict[str, float] = {}
    out["Pc_p_L1"] = float(np.sum((series("pc_l1") + series("p_l1")) * tau))
    out["rho_Lgamma"] = float(
        np.sum(series("rho_lgamma") ** params.gamma * tau) ** (1.0 / params.gamma))
    out["srho_LinfLgamma"] = float(np.max(series("srho_lgamma")))
    out["sp_LinfL1"] = float(np.max(series("sp_l1")))
    out["energy_LinfL1"] = float(np.max(series("energy_l1")))
    out["T_LinfL1"] = float(np.max(series("T_l1")))
    out["logT_L2H1"] = float(np.sqrt(np.sum(series("logT_h1") ** 2 * tau)))
    out["Tbeta2_L2H1"] = float(np.sqrt(np.sum(series("Tbeta2_h1") ** 2 * tau)))
    expo = params.beta + 2.0 / 3.0
    out["T_Lbeta23"] = float(np.sum(series("T_lbeta23") ** expo * tau) ** (1.0 / expo))
    out["piz_L2H1"] = float(np.sqrt(np.sum(series("piz_h1") ** 2 * tau)))
    out["piz_La"] = float(
        np.sum(series("piz_la") ** params.a * tau) ** (1.0 / params.a))
    out["lam_gradp_L2"] = float(np.sqrt(np.sum(series("lam_gradp_l2") ** 2 * tau)))
    out["fS_LinfW1q"] = float(np.max(series("fS_w1q")))
    out["dtS_diss_L1"] = float(np.sum(series("dtS_diss_l1") * tau))
    return out
