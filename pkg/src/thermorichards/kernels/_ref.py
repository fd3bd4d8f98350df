"""Pure-numpy fallback kernels.

Same contracts as the compiled module ``_core``: per-cell safeguarded Newton
root finds for the entropy-variable density inversion and for the implicit
saturation update.  These sit inside every residual evaluation of the outer
Newton loop, which is why a compiled twin exists; the numpy versions keep the
package importable without a C toolchain and serve as the reference in tests.
"""
from __future__ import annotations

import numpy as np


def density_invert_log(rhs_log, T, gamma, eps, K1, tol=1e-14, maxit=100):
    """Solve x + (gamma e^{(gamma-1)x} + eps K1 e^{(K1-1)x})/T = rhs_log for x = log(rho).

    This is the exact inverse of the regularized chemical potential map in
    entropy variables.  The left-hand side is strictly increasing and convex
    in x, so a bracketed Newton iteration converges for any finite
    right-hand side.  Returns x.
    """
    rhs = np.asarray(rhs_log, dtype=float)
    T = np.asarray(T, dtype=float)
    g1 = gamma - 1.0
    k1 = K1 - 1.0
    cg = gamma / T
    ce = eps * K1 / T

    def H(x):
        return x + cg * np.exp(g1 * x) + ce * np.exp(k1 * x) - rhs

    def Hp(x):
        return 1.0 + cg * g1 * np.exp(g1 * x) + ce * k1 * np.exp(k1 * x)

    hi = rhs.copy()                  # H(rhs) >= 0 since the exponential terms are positive
    lo = rhs - 1.0
    r = H(lo)
    step = 1.0
    while np.any(r > 0.0):
        mask = r > 0.0
        step *= 2.0
        lo[mask] -= step
        r = H(lo)

    x = np.minimum(hi, np.maximum(lo, rhs - cg * np.exp(g1 * np.minimum(rhs, 0.0))))
    res = H(x)
    for _ in range(maxit):
        conv = np.abs(res) <= tol
        if np.all(conv):
            break
        hi = np.where(res > 0.0, np.minimum(hi, x), hi)
        lo = np.where(res < 0.0, np.maximum(lo, x), lo)
        xn = x - res / Hp(x)
        bad = ~np.isfinite(xn) | (xn <= lo) | (xn >= hi)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        x = np.where(conv, x, xn)
        res = H(x)
    if not np.all(np.abs(res) <= 10.0 * tol):
        raise FloatingPointError(
            "density inversion did not converge: worst residual "
            f"{float(np.max(np.abs(res))):.3e}"
        )
    return x


def saturation_solve_default(f_prev, p, tau, sigma, A, B, c_p, k_p, eps_log,
                             s_init, tol=1e-13, maxit=100):
    """Per-cell root of (f(s) - f_prev)/tau + sigma*(P_ce(s) + p) = 0 on (0, 1).

    Default closure family only: f(s) = A + B log(1-s) and
    P_ce(s) = c_p s^{-k_p} - eps_log*log(s) (eps_log = 0 unless k_p = 0).
    The map is strictly decreasing with full range, so the root is unique.
    """
    f_prev = np.asarray(f_prev, dtype=float)
    p = np.asarray(p, dtype=float)
    if sigma == 0.0:
        return np.asarray(s_init, dtype=float).copy()

    tiny = 1e-15
    lo = np.full_like(f_prev, tiny)
    hi = np.full_like(f_prev, 1.0 - 1e-16)
    s = np.clip(np.asarray(s_init, dtype=float).copy(), 1e-12, 1.0 - 1e-12)

    def g(sv):
        fs = A + B * np.log1p(-sv)
        pc = c_p * sv ** (-k_p)
        if eps_log != 0.0:
            pc = pc - eps_log * np.log(sv)
        return (fs - f_prev) / tau + sigma * (pc + p)

    def gp(sv):
        d = -B / ((1.0 - sv) * tau) - sigma * c_p * k_p * sv ** (-k_p - 1.0)
        if eps_log != 0.0:
            d = d - sigma * eps_log / sv
        return d

    res = g(s)
    scale = 1.0 / tau + sigma * (np.abs(p) + 1.0)
    for _ in range(maxit):
        conv = np.abs(res) <= tol * scale
        if np.all(conv):
            break
        hi = np.where(res < 0.0, np.minimum(hi, s), hi)
        lo = np.where(res > 0.0, np.maximum(lo, s), lo)
        sn = s - res / gp(s)
        bad = ~np.isfinite(sn) | (sn <= lo) | (sn >= hi)
        sn = np.where(bad, 0.5 * (lo + hi), sn)
        s = np.where(conv, s, sn)
        res = g(s)
        if np.all((hi - lo) <= 1e-16 * np.maximum(s, 1e-3)):
            break
    bad = (np.abs(res) > 1e6 * tol * scale) & ((hi - lo) > 1e-12)
    if np.any(bad):
        raise FloatingPointError(
            "saturation update did not converge: worst residual "
            f"{float(np.max(np.abs(res[bad]))):.3e}"
        )
    return s
