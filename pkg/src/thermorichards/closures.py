"""Transport and capillarity closures.

The model is posed for hypothesis *classes* (monotonicity, growth and
degeneracy conditions), not for specific formulas.  This module provides the
smallest closed-form family that satisfies every hypothesis with slack --
power-law relative permeability and capillary pressure, logarithmic dynamic
capillary potential, constant viscosity, power-law heat conductivity,
projector-based Onsager and reaction closures -- plus the hooks needed to
swap in custom closures (callable + derivative + optional antiderivative).

Every closure is vectorized over numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq


def projector(n: int) -> np.ndarray:
    """Orthogonal projector onto the complement of span{(1,...,1)} in R^n."""
    return np.eye(n) - np.full((n, n), 1.0 / n)


def apply_projector(u: np.ndarray) -> np.ndarray:
    """Remove the species mean: (Pi u)_i = u_i - mean(u) along the last axis."""
    return u - np.mean(u, axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# relative permeability


class PowerKr:
    """k_r(s) = clamp(s, 0, 1)^alpha_r; vanishes for s <= 0, equals 1 for s >= 1."""

    kind = "power"

    def __init__(self, alpha_r: float):
        self.alpha_r = float(alpha_r)

    def __call__(self, s):
        sc = np.clip(s, 0.0, 1.0)
        return sc ** self.alpha_r

    def prime(self, s):
        s = np.asarray(s, dtype=float)
        inside = (s > 0.0) & (s < 1.0)
        out = np.zeros_like(s)
        out[inside] = self.alpha_r * s[inside] ** (self.alpha_r - 1.0)
        return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# capillary pressure


class PowerPc:
    """P_c(s) = c_p * s^(-k_p), strictly decreasing and positive on (0, 1)."""

    kind = "power"

    def __init__(self, c_p: float, k_p: float):
        self.c_p = float(c_p)
        self.k_p = float(k_p)

    def __call__(self, s):
        return self.c_p * np.asarray(s, dtype=float) ** (-self.k_p)

    def prime(self, s):
        return -self.c_p * self.k_p * np.asarray(s, dtype=float) ** (-self.k_p - 1.0)

    def antiderivative(self, s):
        s = np.asarray(s, dtype=float)
        if self.k_p == 1.0:
            return self.c_p * np.log(s)
        return self.c_p * s ** (1.0 - self.k_p) / (1.0 - self.k_p)


class CallablePc:
    """Wrap a user capillary-pressure function; integrals fall back to quadrature."""

    kind = "custom"

    def __init__(self, fn: Callable, prime: Optional[Callable] = None,
                 antiderivative: Optional[Callable] = None):
        self._fn = fn
        self._prime = prime
        self._anti = antiderivative

    def __call__(self, s):
        return self._fn(s)

    def prime(self, s):
        if self._prime is not None:
            return self._prime(s)
        s = np.asarray(s, dtype=float)
        h = 1e-7 * np.maximum(np.abs(s), 1.0)
        return (self._fn(s + h) - self._fn(s - h)) / (2.0 * h)

    antiderivative = None

    def integrate(self, lo: float, hi: float) -> float:
        if self._anti is not None:
            return self._anti(hi) - self._anti(lo)
        val, _ = quad(self._fn, lo, hi, epsabs=1e-12, epsrel=1e-12, limit=200)
        return val


# ---------------------------------------------------------------------------
# dynamic capillary potential


class LogOneMinusF:
    """f(s) = A + B*log(1 - s): decreasing, f(0) = A > 0, f(1-) = -inf."""

    kind = "log1m"

    def __init__(self, A: float, B: float):
        if A <= 0.0 or B <= 0.0:
            raise ValueError("dynamic capillary potential requires A > 0, B > 0")
        self.A = float(A)
        self.B = float(B)

    def __call__(self, s):
        return self.A + self.B * np.log1p(-np.asarray(s, dtype=float))

    def prime(self, s):
        return -self.B / (1.0 - np.asarray(s, dtype=float))

    def inverse(self, y):
        """Solve f(s) = y for s in (0, 1); defined for y < A."""
        return -np.expm1((np.asarray(y, dtype=float) - self.A) / self.B)


class CallableF:
    """Wrap a user dynamic capillary potential; the inverse uses bracketing."""

    kind = "custom"

    def __init__(self, fn: Callable, prime: Optional[Callable] = None):
        self._fn = fn
        self._prime = prime

    def __call__(self, s):
        return self._fn(s)

    def prime(self, s):
        if self._prime is not None:
            return self._prime(s)
        s = np.asarray(s, dtype=float)
        h = 1e-7
        return (self._fn(s + h) - self._fn(s - h)) / (2.0 * h)

    def inverse(self, y):
        y = float(y)
        return brentq(lambda s: float(self._fn(s)) - y, 1e-12, 1.0 - 1e-12,
                      xtol=1e-15, rtol=8.9e-16)


# ---------------------------------------------------------------------------
# viscosity and heat conductivity


class ConstantViscosity:
    kind = "constant"

    def __init__(self, value: float = 1.0):
        if value <= 0.0:
            raise ValueError("viscosity must be positive")
        self.value = float(value)

    def __call__(self, T):
        return np.full_like(np.asarray(T, dtype=float), self.value)

    def prime(self, T):
        return np.zeros_like(np.asarray(T, dtype=float))


class PowerKappa:
    """kappa(T) = kappa1 * (1 + T^beta)."""

    kind = "power1p"

    def __init__(self, kappa1: float, beta: float):
        self.kappa1 = float(kappa1)
        self.beta = float(beta)

    def __call__(self, T):
        return self.kappa1 * (1.0 + np.asarray(T, dtype=float) ** self.beta)

    def prime(self, T):
        return self.kappa1 * self.beta * np.asarray(T, dtype=float) ** (self.beta - 1.0)


# ---------------------------------------------------------------------------
# Onsager mobility closure


class ProjectorOnsager:
    """L = D * Pi^N (constant) with optional heat-mass cross coefficients.

    The cross coefficients L_{i0} = c0 * T * rho_i / (1 + rho) satisfy the
    required |L_{i0}|/T bound; c0 = 0 switches cross heat-mass coupling off.
    """

    kind = "projector"
    has_derivatives = True

    def __init__(self, N: int, D: float = 1.0, c0: float = 0.0):
        self.N = int(N)
        self.D = float(D)
        self.c0 = float(c0)
        self._Pi = projector(self.N)

    def lmat(self, rho: np.ndarray, T: np.ndarray) -> np.ndarray:
        M = T.shape[0]
        return np.broadcast_to(self.D * self._Pi, (M, self.N, self.N)).copy()

    def li0(self, rho: np.ndarray, T: np.ndarray) -> np.ndarray:
        rho_tot = rho.sum(axis=1)
        return self.c0 * T[:, None] * rho / (1.0 + rho_tot[:, None])

    def dlmat(self, rho, T):
        M = T.shape[0]
        return (np.zeros((M, self.N, self.N, self.N)), np.zeros((M, self.N, self.N)))

    def dli0(self, rho, T):
        """Return (d L_{i0}/d rho_j, d L_{i0}/d T) with shapes (M,N,N), (M,N)."""
        M = T.shape[0]
        rho_tot = rho.sum(axis=1)
        denom = 1.0 + rho_tot
        d_rho = np.zeros((M, self.N, self.N))
        for i in range(self.N):
            for j in range(self.N):
                d_rho[:, i, j] = self.c0 * T * (
                    (1.0 if i == j else 0.0) / denom - rho[:, i] / denom ** 2
                )
        d_T = self.c0 * rho / denom[:, None]
        return d_rho, d_T


# ---------------------------------------------------------------------------
# reaction closure


class ProjectorPowerReactions:
    """r_i(rho, T, zeta) = -C1 |Pi zeta|^(a-2) (Pi zeta)_i.

    Mass-conservative (components sum to zero) and dissipative:
    sum_i r_i zeta_i = -C1 |Pi zeta|^a <= 0.
    """

    kind = "projector_power"
    has_derivatives = True

    def __init__(self, N: int, C1: float, a: float):
        self.N = int(N)
        self.C1 = float(C1)
        self.a = float(a)
        self._Pi = projector(self.N)

    def __call__(self, rho_tot: np.ndarray, T: np.ndarray, zeta: np.ndarray) -> np.ndarray:
        u = apply_projector(zeta)
        norm = np.linalg.norm(u, axis=-1, keepdims=True)
        return -self.C1 * norm ** (self.a - 2.0) * u

    def dzeta(self, rho_tot: np.ndarray, T: np.ndarray, zeta: np.ndarray) -> np.ndarray:
        """d r_i / d zeta_j, shape (M, N, N); continuous for a > 2."""
        u = apply_projector(zeta)
        norm = np.linalg.norm(u, axis=-1)
        M = zeta.shape[0]
        out = np.zeros((M, self.N, self.N))
        pos = norm > 0.0
        if np.any(pos):
            npow = np.zeros_like(norm)
            npow[pos] = norm[pos] ** (self.a - 4.0)
            outer = u[:, :, None] * u[:, None, :]
            out = -self.C1 * (
                (self.a - 2.0) * npow[:, None, None] * outer
                + norm[:, None, None] ** (self.a - 2.0) * self._Pi[None, :, :]
            )
            out[~pos] = 0.0
        return out

    def drho(self, rho_tot, T, zeta):
        return np.zeros_like(zeta)

    def dT(self, rho_tot, T, zeta):
        return np.zeros_like(zeta)


class ZeroReactions:
    kind = "zero"
    has_derivatives = True

    def __init__(self, N: int):
        self.N = int(N)

    def __call__(self, rho_tot, T, zeta):
        return np.zeros_like(zeta)

    def dzeta(self, rho_tot, T, zeta):
        M = zeta.shape[0]
        return np.zeros((M, self.N, self.N))

    def drho(self, rho_tot, T, zeta):
        return np.zeros_like(zeta)

    def dT(self, rho_tot, T, zeta):
        return np.zeros_like(zeta)


# ---------------------------------------------------------------------------
# porosity


class ConstantPorosity:
    # out-of-range values are caught by the hypothesis validator, not here
    kind = "constant"

    def __init__(self, value: float = 0.3):
        self.value = float(value)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return np.full(points.shape[0], self.value)


# ---------------------------------------------------------------------------
# the bundle


@dataclass
class ClosureSet:
    """All user-selectable constitutive functions of the model."""

    kr: PowerKr
    pc: PowerPc
    f: LogOneMinusF
    viscosity: ConstantViscosity
    kappa: PowerKappa
    onsager: ProjectorOnsager
    reactions: ProjectorPowerReactions
    b: np.ndarray
    phi: ConstantPorosity

    def pc_eps(self, s, eps: float, k_p: float):
        """Regularized capillary pressure: -eps*log(s) added only when k_p = 0."""
        s = np.asarray(s, dtype=float)
        base = self.pc(s)
        if k_p == 0.0 and eps > 0.0:
            return base - eps * np.log(s)
        return base

    def pc_eps_prime(self, s, eps: float, k_p: float):
        s = np.asarray(s, dtype=float)
        base = self.pc.prime(s)
        if k_p == 0.0 and eps > 0.0:
            return base - eps / s
        return base

    def pc_eps_integral(self, lo, hi, eps: float, k_p: float):
        """Integral of the regularized capillary pressure from lo to hi (vectorized)."""
        anti = getattr(self.pc, "antiderivative", None)
        if anti is not None:
            base = anti(hi) - anti(lo)
        else:
            lo_a, hi_a = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
            base = np.array([self.pc.integrate(l, h) for l, h in
                             zip(np.atleast_1d(lo_a), np.atleast_1d(hi_a))])
            base = base.reshape(np.shape(hi_a)) if np.ndim(hi_a) else float(base[0])
        if k_p == 0.0 and eps > 0.0:
            def ilog(s):
                s = np.asarray(s, dtype=float)
                return s * np.log(s) - s
            base = base - eps * (ilog(hi) - ilog(lo))
        return base

    def sat_floor_bound(self, p_at: float, s0: float = 0.5) -> float:
        """Largest admissible eps for the saturation floor: f^{-1}(p_at / lambda0).

        lambda0 = inf over (0, s0] of P_c(s)/f(s), with s0 restricted to the
        region where f stays positive.
        """
        s_hi = min(s0, self._f_positive_sup())
        grid = np.geomspace(1e-10, s_hi, 4096)
        lam0 = float(np.min(self.pc(grid) / self.f(grid)))
        if lam0 <= 0.0:
            return 0.0
        y = p_at / lam0
        f0 = float(self.f(0.0))
        if y >= f0:
            return 0.0
        return float(self.f.inverse(y))

    def _f_positive_sup(self) -> float:
        if float(self.f(0.5)) > 0.0:
            return 0.5
        return float(brentq(lambda s: float(self.f(s)), 1e-12, 0.5))


def default_closures(params) -> ClosureSet:
    """The documented default family; passes every hypothesis check with slack."""
    N = params.N
    return ClosureSet(
        kr=PowerKr(params.alpha_r),
        pc=PowerPc(params.c_p, params.k_p),
        f=LogOneMinusF(4.0, 1.0),
        viscosity=ConstantViscosity(1.0),
        kappa=PowerKappa(1.0, params.beta),
        onsager=ProjectorOnsager(N, D=1.0, c0=0.0),
        reactions=ProjectorPowerReactions(N, C1=1.0, a=params.a),
        b=np.zeros((N, N)),
        phi=ConstantPorosity(0.3),
    )
