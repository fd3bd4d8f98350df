"""Solver state in entropy variables and the cell-local elimination layer.

The unknowns per cell are z = mu/T (one per species) and w = log T; the
saturation S is eliminated cell-locally through the implicit capillary
relation, so positivity of densities and temperature is structural and the
Newton system stays in (z, w) only.

``eliminate`` computes every derived cell quantity the residual needs
together with its analytic derivatives with respect to (z, w); the Jacobian
assembly is pure chain rule on top of these blocks.
"""
from __future__ import annotations

from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np
from scipy.optimize import brentq

from . import kernels
from .closures import ClosureSet, apply_projector
from .grid import Grid
from .params import ModelParams


@dataclass
class EntropyState:
    """Per-cell unknowns z = mu/T, w = log T plus the eliminated saturation."""

    z: np.ndarray       # (M, N)
    w: np.ndarray       # (M,)
    S: np.ndarray       # (M,)
    time: float = 0.0

    def copy(self) -> "EntropyState":
        return EntropyState(self.z.copy(), self.w.copy(), self.S.copy(), self.time)

    @property
    def ncells(self) -> int:
        return self.w.shape[0]


@dataclass
class Problem:
    """Grid, parameters and closures bundled with cached discrete operators."""

    params: ModelParams
    closures: ClosureSet
    grid: Grid
    phi: np.ndarray     # (M,) porosity at cell centers

    def __post_init__(self):
        from .operators import laplace_matrix
        self.lap = laplace_matrix(self.grid)
        self.mu0 = np.asarray(self.params.mu0, dtype=float)
        self.b = np.asarray(self.closures.b, dtype=float)
        self.has_b = bool(np.any(self.b != 0.0))

    @classmethod
    def build(cls, params: ModelParams, closures: ClosureSet, grid: Grid) -> "Problem":
        phi = np.asarray(closures.phi(grid.cell_centers), dtype=float)
        return cls(params=params, closures=closures, grid=grid, phi=phi)


def _solve_saturation(p: np.ndarray, S_prev: np.ndarray, tau: float, sigma: float,
                      eps: float, params: ModelParams, closures: ClosureSet) -> np.ndarray:
    """Per-cell root of (f(s) - f(S_prev))/tau + sigma (P_ce(s) + p) = 0."""
    f_prev = np.asarray(closures.f(S_prev), dtype=float)
    fam = (getattr(closures.f, "kind", "") == "log1m"
           and getattr(closures.pc, "kind", "") == "power")
    if fam:
        eps_log = eps if params.k_p == 0.0 else 0.0
        return kernels.saturation_solve_default(
            np.ascontiguousarray(f_prev), np.ascontiguousarray(p, dtype=float),
            tau, sigma, closures.f.A, closures.f.B,
            closures.pc.c_p, params.k_p, eps_log,
            np.ascontiguousarray(S_prev, dtype=float))
    if sigma == 0.0:
        return np.asarray(S_prev, dtype=float).copy()

    out = np.empty_like(f_prev)
    for c in range(out.shape[0]):
        def g(s):
            pc = float(closures.pc_eps(s, eps, params.k_p))
            return (float(closures.f(s)) - f_prev[c]) / tau + sigma * (pc + p[c])
        out[c] = brentq(g, 1e-14, 1.0 - 1e-14, xtol=1e-15, rtol=8.9e-16)
    return out


def eliminate(z: np.ndarray, w: np.ndarray, S_prev: np.ndarray, sigma: float,
              problem: Problem, need_derivatives: bool = True) -> SimpleNamespace:
    """Derive all cell fields (and optionally their (z, w)-derivatives).

    Returns a namespace with densities, pressure, energies, saturation and
    transport coefficients; derivative arrays use the convention
    ``d<name>_dz`` of shape (M, ..., N) and ``d<name>_dw`` of shape (M, ...).
    """
    pr = problem.params
    cl = problem.closures
    eps, K1, gamma, c_w = pr.eps, pr.K1, pr.gamma, pr.c_w
    M, N = z.shape

    T = np.exp(w)
    invT = np.exp(-w)

    zmax = z.max(axis=1)
    lse = zmax + np.log(np.sum(np.exp(z - zmax[:, None]), axis=1))
    rhs_log = lse + c_w * w - 1.0
    x = kernels.density_invert_log(
        np.ascontiguousarray(rhs_log), np.ascontiguousarray(T), gamma, eps, K1)
    rho_tot = np.exp(x)
    rho = rho_tot[:, None] * np.exp(z - lse[:, None])

    rg = rho_tot ** (gamma - 1.0)
    rk = rho_tot ** (K1 - 1.0) if eps else np.zeros(M)
    p = T * rho_tot + (gamma - 1.0) * rho_tot ** gamma - pr.p_at
    rhoe = rho_tot ** gamma + c_w * rho_tot * T + pr.p_at
    if eps:
        p = p + eps * (K1 - 1.0) * rho_tot ** K1
        rhoe = rhoe + eps * rho_tot ** K1

    S = _solve_saturation(p, S_prev, pr.tau, sigma, eps, pr, cl)
    pc_S = np.asarray(cl.pc_eps(S, eps, pr.k_p), dtype=float)
    Ef = rhoe * S - cl.pc_eps_integral(np.full(M, 0.5), S, eps, pr.k_p)
    Es = pr.c_s * T
    if eps:
        Es = Es + eps * (pr.K2 - 1.0) * T ** pr.K2

    lam = np.asarray(cl.kr(S), dtype=float) / np.asarray(cl.viscosity(T), dtype=float)
    kap = np.asarray(cl.kappa(T), dtype=float)
    L00 = kap * T ** 2
    Lmat = cl.onsager.lmat(rho, T)
    Li0 = cl.onsager.li0(rho, T)

    zeta = apply_projector(z)
    r_tilde = cl.reactions(rho_tot, T, zeta)
    r_eps = r_tilde - eps * np.abs(z) ** (pr.a - 2.0) * z if eps else r_tilde

    out = SimpleNamespace(
        T=T, invT=invT, rho=rho, rho_tot=rho_tot, p=p, rhoe=rhoe,
        S=S, pc_S=pc_S, Ef=Ef, Es=Es, lam=lam, kappa=kap, L00=L00,
        Lmat=Lmat, Li0=Li0, r_eps=r_eps,
    )
    if not need_derivatives:
        return out

    # density inversion derivatives via the implicit function theorem;
    # A = (gamma rho^{gamma-1} + eps K1 rho^{K1-1}) / T
    A_rho = gamma * (gamma - 1.0) * rho_tot ** (gamma - 2.0) / T
    A_val = gamma * rg / T
    if eps:
        A_rho = A_rho + eps * K1 * (K1 - 1.0) * rho_tot ** (K1 - 2.0) / T
        A_val = A_val + eps * K1 * rk / T
    A_w = -A_val
    Dden = 1.0 + rho_tot * A_rho
    drhotot_dz = rho / Dden[:, None]
    drhotot_dw = rho_tot * (c_w - A_w) / Dden
    eye = np.eye(N)
    drho_dz = rho[:, :, None] * (eye[None, :, :]
                                 - (A_rho[:, None] * drhotot_dz)[:, None, :])
    drho_dw = rho * (c_w - A_w - A_rho * drhotot_dw)[:, None]

    p_rho = T + gamma * (gamma - 1.0) * rg
    e_rho = gamma * rg + c_w * T
    if eps:
        p_rho = p_rho + eps * K1 * (K1 - 1.0) * rk
        e_rho = e_rho + eps * K1 * rk
    dp_dz = p_rho[:, None] * drhotot_dz
    dp_dw = p_rho * drhotot_dw + T * rho_tot
    drhoe_dz = e_rho[:, None] * drhotot_dz
    drhoe_dw = e_rho * drhotot_dw + c_w * rho_tot * T

    if sigma > 0.0:
        fp = np.asarray(cl.f.prime(S), dtype=float)
        pcp = np.asarray(cl.pc_eps_prime(S, eps, pr.k_p), dtype=float)
        S_p = -sigma / (fp / pr.tau + sigma * pcp)
    else:
        S_p = np.zeros(M)
    dS_dz = S_p[:, None] * dp_dz
    dS_dw = S_p * dp_dw

    dEf_dz = S[:, None] * drhoe_dz + (rhoe - pc_S)[:, None] * dS_dz
    dEf_dw = S * drhoe_dw + (rhoe - pc_S) * dS_dw
    dEs_dw = pr.c_s * T
    if eps:
        dEs_dw = dEs_dw + eps * pr.K2 * (pr.K2 - 1.0) * T ** pr.K2

    krp = np.asarray(cl.kr.prime(S), dtype=float)
    mu_T = np.asarray(cl.viscosity(T), dtype=float)
    mup = np.asarray(cl.viscosity.prime(T), dtype=float)
    dlam_dz = (krp / mu_T)[:, None] * dS_dz
    dlam_dw = krp / mu_T * dS_dw - lam * mup / mu_T * T

    kapp = np.asarray(cl.kappa.prime(T), dtype=float)
    dL00_dw = (kapp * T ** 2 + 2.0 * kap * T) * T

    dL_drho, dL_dT = cl.onsager.dlmat(rho, T)
    dLi0_drho, dLi0_dT = cl.onsager.dli0(rho, T)
    dLmat_dz = np.einsum("mabk,mkj->mabj", dL_drho, drho_dz)
    dLmat_dw = np.einsum("mabk,mk->mab", dL_drho, drho_dw) + dL_dT * T[:, None, None]
    dLi0_dz = np.einsum("mik,mkj->mij", dLi0_drho, drho_dz)
    dLi0_dw = np.einsum("mik,mk->mi", dLi0_drho, drho_dw) + dLi0_dT * T[:, None]

    Pi = np.eye(N) - np.full((N, N), 1.0 / N)
    dr_dzeta = cl.reactions.dzeta(rho_tot, T, zeta)
    dr_dz = (np.einsum("mik,kj->mij", dr_dzeta, Pi)
             + np.einsum("mi,mj->mij", cl.reactions.drho(rho_tot, T, zeta), drhotot_dz))
    dr_dw = (cl.reactions.drho(rho_tot, T, zeta) * drhotot_dw[:, None]
             + cl.reactions.dT(rho_tot, T, zeta) * T[:, None])
    if eps:
        dr_dz = dr_dz - (eps * (pr.a - 1.0) * np.abs(z) ** (pr.a - 2.0))[:, :, None] \
            * eye[None, :, :]

    out.drho_dz, out.drho_dw = drho_dz, drho_dw
    out.drhotot_dz, out.drhotot_dw = drhotot_dz, drhotot_dw
    out.dp_dz, out.dp_dw = dp_dz, dp_dw
    out.drhoe_dz, out.drhoe_dw = drhoe_dz, drhoe_dw
    out.dS_dz, out.dS_dw = dS_dz, dS_dw
    out.dEf_dz, out.dEf_dw = dEf_dz, dEf_dw
    out.dEs_dw = dEs_dw
    out.dlam_dz, out.dlam_dw = dlam_dz, dlam_dw
    out.dL00_dw = dL00_dw
    out.dLmat_dz, out.dLmat_dw = dLmat_dz, dLmat_dw
    out.dLi0_dz, out.dLi0_dw = dLi0_dz, dLi0_dw
    out.dr_dz, out.dr_dw = dr_dz, dr_dw
    return out


def derive_fields(state: EntropyState, problem: Problem) -> SimpleNamespace:
    """Physical fields of an accepted state (its stored S, no saturation solve)."""
    pr = problem.params
    cl = problem.closures
    M, N = state.z.shape
    T = np.exp(state.w)
    from .constitutive import (densities_from_entropy_vars, internal_energy,
                               pressure, water_entropy)
    rho = densities_from_entropy_vars(state.z, state.w, pr.eps, pr)
    p = pressure(rho, T, pr.eps, pr)
    rhoe = internal_energy(rho, T, pr.eps, pr)
    rhoeta = water_entropy(rho, T, pr)
    S = state.S
    Ef = rhoe * S - cl.pc_eps_integral(np.full(M, 0.5), S, pr.eps, pr.k_p)
    eta_s = pr.c_s - 1.0 + pr.c_s * np.log(T)
    Es = pr.c_s * T
    if pr.eps:
        eta_s = eta_s + pr.eps * pr.K2 * T ** (pr.K2 - 1.0)
        Es = Es + pr.eps * (pr.K2 - 1.0) * T ** pr.K2
    return SimpleNamespace(
        rho=rho, rho_tot=rho.sum(axis=1), T=T, p=p, mu=T[:, None] * state.z,
        rhoe=rhoe, rhoeta=rhoeta, S=S, Ef=Ef, Es=Es, eta_s=eta_s,
    )


def state_from_primitives(rho: np.ndarray, T: np.ndarray, S: np.ndarray,
                          problem: Problem, time: float = 0.0) -> EntropyState:
    """Build an entropy-variable state from (rho_i, T, S) fields.

    The initial saturation is truncated to [eps, 1-eps] as the scheme
    requires; densities and temperature must be strictly positive.
    """
    from .constitutive import chemical_potentials
    pr = problem.params
    rho = np.asarray(rho, dtype=float)
    T = np.asarray(T, dtype=float)
    if np.any(rho <= 0.0) or np.any(T <= 0.0):
        raise ValueError("initial densities and temperature must be positive")
    eps_trunc = pr.eps if pr.eps > 0.0 else 1e-12
    S = np.clip(np.asarray(S, dtype=float), eps_trunc, 1.0 - eps_trunc)
    mu = chemical_potentials(rho, T, pr.eps, pr)
    return EntropyState(z=mu / T[:, None], w=np.log(T), S=S, time=time)
