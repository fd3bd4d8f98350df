"""Helmholtz free energy and everything derived from it.

The water phase free energy density is

    (rho Psi)_w = T sum_i rho_i log rho_i + rho^gamma - c_w rho T log T + p_at

and the regularized variant used by the implicit scheme adds eps*rho^K1.
Chemical potentials, pressure, internal energy and entropy all follow by the
standard Legendre relations, so consistency is testable by finite
differences; the identities are exercised heavily in the test suite.

All functions are vectorized: ``rho`` has shape (..., N) and ``T`` broadcasts
against the leading axes.  Quantities are regularized at level ``eps``;
``eps = 0`` recovers the unregularized model.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .closures import ClosureSet, apply_projector, projector
from .params import ModelParams

__all__ = [
    "DomainError",
    "ThermoPoint",
    "free_energy_water",
    "chemical_potentials",
    "pressure",
    "internal_energy",
    "water_entropy",
    "skeleton_entropy_energy",
    "interfacial_and_fluid_energy",
    "capillary_pressure_reg",
    "mobility",
    "onsager_fluxes",
    "entropy_production_rate",
    "projector",
    "apply_projector",
    "reaction_terms",
    "densities_from_entropy_vars",
    "thermo_point",
]


class DomainError(ValueError):
    """Raised when a thermodynamic function is evaluated outside its domain."""


def _check_state(rho, T):
    if np.any(np.asarray(rho) <= 0.0):
        raise DomainError("all species densities must be positive")
    if np.any(np.asarray(T) <= 0.0):
        raise DomainError("temperature must be positive")


def _check_T(T):
    if np.any(np.asarray(T) <= 0.0):
        raise DomainError("temperature must be positive")


def free_energy_water(rho, T, eps, params: ModelParams):
    """Regularized water free energy density (rho Psi)_{w,eps}."""
    rho = np.asarray(rho, dtype=float)
    T = np.asarray(T, dtype=float)
    _check_state(rho, T)
    rho_tot = rho.sum(axis=-1)
    val = (
        T * np.sum(rho * np.log(rho), axis=-1)
        + rho_tot ** params.gamma
        - params.c_w * rho_tot * T * np.log(T)
        + params.p_at
    )
    if eps:
        val = val + eps * rho_tot ** params.K1
    return val


def chemical_potentials(rho, T, eps, params: ModelParams):
    """mu_i = d(rho Psi)_{w,eps} / d rho_i, shape (..., N)."""
    rho = np.asarray(rho, dtype=float)
    T = np.asarray(T, dtype=float)
    _check_state(rho, T)
    rho_tot = rho.sum(axis=-1)
    common = params.gamma * rho_tot ** (params.gamma - 1.0) - params.c_w * T * np.log(T)
    if eps:
        common = common + eps * params.K1 * rho_tot ** (params.K1 - 1.0)
    return T[..., None] * (np.log(rho) + 1.0) + common[..., None]


def pressure(rho, T, eps, params: ModelParams):
    """p_eps = -(rho Psi)_{w,eps} + sum_i rho_i mu_{i,eps} in closed form."""
    rho = np.asarray(rho, dtype=float)
    T = np.asarray(T, dtype=float)
    _check_state(rho, T)
    rho_tot = rho.sum(axis=-1)
    val = T * rho_tot + (params.gamma - 1.0) * rho_tot ** params.gamma - params.p_at
    if eps:
        val = val + eps * (params.K1 - 1.0) * rho_tot ** params.K1
    return val


def internal_energy(rho, T, eps, params: ModelParams):
    """(rho e)_eps = (rho Psi)_{w,eps} - T d(rho Psi)_{w,eps}/dT."""
    rho = np.asarray(rho, dtype=float)
    T = np.asarray(T, dtype=float)
    _check_state(rho, T)
    rho_tot = rho.sum(axis=-1)
    val = rho_tot ** params.gamma + params.c_w * rho_tot * T + params.p_at
    if eps:
        val = val + eps * rho_tot ** params.K1
    return val


def water_entropy(rho, T, params: ModelParams):
    """(rho eta) = -sum_i rho_i log rho_i + c_w rho (log T + 1); eps-independent."""
    rho = np.asarray(rho, dtype=float)
    T = np.asarray(T, dtype=float)
    _check_state(rho, T)
    rho_tot = rho.sum(axis=-1)
    return -np.sum(rho * np.log(rho), axis=-1) + params.c_w * rho_tot * (np.log(T) + 1.0)


def skeleton_entropy_energy(T, eps, params: ModelParams):
    """Return ((rho eta)_{s,eps}, E_{s,eps}) for the skeleton."""
    T = np.asarray(T, dtype=float)
    _check_T(T)
    eta = params.c_s - 1.0 + params.c_s * np.log(T)
    ene = params.c_s * T
    if eps:
        eta = eta + eps * params.K2 * T ** (params.K2 - 1.0)
        ene = ene + eps * (params.K2 - 1.0) * T ** params.K2
    return eta, ene


def interfacial_and_fluid_energy(rho, T, S, eps, params: ModelParams,
                                 closures: ClosureSet):
    """Return (E_int, E_{f,eps}).

    E_int integrates the unregularized capillary pressure from S to 1; the
    regularized fluid energy anchors the capillary integral at 1/2:
    E_{f,eps} = (rho e)_eps * S - int_{1/2}^{S} P_{c,eps}.
    """
    S = np.asarray(S, dtype=float)
    if np.any(S <= 0.0) or np.any(S >= 1.0):
        raise DomainError("saturation must lie strictly between 0 and 1")
    e_int = closures.pc_eps_integral(S, np.ones_like(S), eps=0.0, k_p=params.k_p)
    rhoe = internal_energy(rho, T, eps, params)
    e_f = rhoe * S - closures.pc_eps_integral(
        np.full_like(S, 0.5), S, eps=eps, k_p=params.k_p)
    return e_int, e_f


def capillary_pressure_reg(S, eps, params: ModelParams, closures: ClosureSet):
    """P_{c,eps}: the bare P_c when it already blows up (k_p > 0), else P_c - eps log S."""
    S = np.asarray(S, dtype=float)
    if np.any(S <= 0.0) or np.any(S >= 1.0):
        raise DomainError("saturation must lie strictly between 0 and 1")
    return closures.pc_eps(S, eps, params.k_p)


def mobility(S, T, closures: ClosureSet):
    """lambda(S, T) = k_r(S) / mu(T); k_r clamps outside [0, 1]."""
    T = np.asarray(T, dtype=float)
    _check_T(T)
    return closures.kr(S) / closures.viscosity(T)


def onsager_fluxes(rho, T, grad_zeta, grad_invT, closures: ClosureSet):
    """Diffusion and heat fluxes at one state point.

    grad_zeta has shape (N, d) (gradients of mu_i/T), grad_invT shape (d,).
    Returns (J, q) with shapes (N, d) and (d,):

        J_i = L_i0 grad(1/T) - sum_j L_ij grad(mu_j/T)
        q   = L_00 grad(1/T) + sum_j L_0j grad(mu_j/T),  L_00 = kappa(T) T^2.
    """
    rho = np.atleast_2d(np.asarray(rho, dtype=float))
    T = np.atleast_1d(np.asarray(T, dtype=float))
    _check_state(rho, T)
    grad_zeta = np.asarray(grad_zeta, dtype=float)
    grad_invT = np.asarray(grad_invT, dtype=float)
    L = closures.onsager.lmat(rho, T)[0]
    Li0 = closures.onsager.li0(rho, T)[0]
    L00 = float(closures.kappa(T)[0] * T[0] ** 2)
    J = Li0[:, None] * grad_invT[None, :] - np.einsum("ij,jd->id", L, grad_zeta)
    q = L00 * grad_invT + np.einsum("j,jd->d", Li0, grad_zeta)
    return J, q


def entropy_production_rate(rho, T, grad_zeta, grad_invT, closures: ClosureSet):
    """The Onsager quadratic form sum_ij L_ij gz_i.gz_j + L_00 |g(1/T)|^2 (>= 0)."""
    rho = np.atleast_2d(np.asarray(rho, dtype=float))
    T = np.atleast_1d(np.asarray(T, dtype=float))
    grad_zeta = np.asarray(grad_zeta, dtype=float)
    grad_invT = np.asarray(grad_invT, dtype=float)
    L = closures.onsager.lmat(rho, T)[0]
    L00 = float(closures.kappa(T)[0] * T[0] ** 2)
    return float(
        np.einsum("ij,id,jd->", L, grad_zeta, grad_zeta)
        + L00 * np.dot(grad_invT, grad_invT)
    )


def reaction_terms(rho_tot, T, zeta, eps, params: ModelParams, closures: ClosureSet):
    """Regularized sources r_{i,eps} = r_i(rho, T, Pi zeta) - eps |zeta_i|^{a-2} zeta_i."""
    T = np.atleast_1d(np.asarray(T, dtype=float))
    _check_T(T)
    rho_tot = np.atleast_1d(np.asarray(rho_tot, dtype=float))
    zeta = np.asarray(zeta, dtype=float)
    squeeze = zeta.ndim == 1
    zeta2 = np.atleast_2d(zeta)
    r = closures.reactions(rho_tot, T, apply_projector(zeta2))
    if eps:
        r = r - eps * np.abs(zeta2) ** (params.a - 2.0) * zeta2
    return r[0] if squeeze else r


def densities_from_entropy_vars(z, w, eps, params: ModelParams,
                                tol: float = 1e-14, maxit: int = 100):
    """Invert the entropy-variable map: given z = mu/T and w = log T, recover rho.

    The total density solves the strictly increasing scalar equation

        log rho + (gamma rho^{gamma-1} + eps K1 rho^{K1-1}) / T
            = logsumexp(z) + c_w w - 1

    (the exact inverse of the regularized chemical potentials) and the
    species densities follow as rho_i = rho * softmax(z)_i, which is exactly
    mass-consistent.  Shape: z (..., N), w broadcastable; returns rho with
    the shape of z.
    """
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(w))):
        raise DomainError("entropy variables must be finite")
    squeeze = z.ndim == 1
    z2 = np.atleast_2d(z)
    w2 = np.broadcast_to(np.atleast_1d(w), z2.shape[:-1])
    zmax = z2.max(axis=-1)
    lse = zmax + np.log(np.sum(np.exp(z2 - zmax[..., None]), axis=-1))
    rhs_log = lse + params.c_w * w2 - 1.0
    T = np.exp(w2)
    x = kernels.density_invert_log(
        np.ascontiguousarray(rhs_log.ravel()),
        np.ascontiguousarray(T.ravel()),
        params.gamma, eps, params.K1, tol, maxit,
    ).reshape(rhs_log.shape)
    shares = np.exp(z2 - lse[..., None])
    rho = np.exp(x)[..., None] * shares
    return rho[0] if squeeze else rho


@dataclass(frozen=True)
class ThermoPoint:
    """One thermodynamic state with its derived regularized quantities."""

    rho: np.ndarray
    T: float
    eps: float
    mu: np.ndarray
    p: float
    rhoe: float
    rhoeta: float

    def euler_residual(self) -> float:
        """p + (rho e) - sum_i rho_i mu_i - T (rho eta); zero for a consistent state."""
        return float(self.p + self.rhoe - np.dot(self.rho, self.mu) - self.T * self.rhoeta)


def thermo_point(rho, T, eps, params: ModelParams) -> ThermoPoint:
    rho = np.asarray(rho, dtype=float)
    _check_state(rho, T)
    return ThermoPoint(
        rho=rho,
        T=float(T),
        eps=float(eps),
        mu=chemical_potentials(rho, np.asarray(float(T)), eps, params),
        p=float(pressure(rho, np.asarray(float(T)), eps, params)),
        rhoe=float(internal_energy(rho, np.asarray(float(T)), eps, params)),
        rhoeta=float(water_entropy(rho, np.asarray(float(T)), params)),
    )
