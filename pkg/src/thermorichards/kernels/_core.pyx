# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: per-cell scalar root finds.

Mirrors kernels._ref exactly (same bracketing logic, same tolerances) so the
two implementations can be swapped and cross-checked.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log, log1p, pow

cnp.import_array()


def density_invert_log(cnp.ndarray[cnp.float64_t, ndim=1] rhs_log,
                       cnp.ndarray[cnp.float64_t, ndim=1] T,
                       double gamma, double eps, double K1,
                       double tol=1e-14, int maxit=100):
    """Solve x + (gamma e^{(gamma-1)x} + eps K1 e^{(K1-1)x})/T = rhs_log for x = log(rho)."""
    cdef Py_ssize_t m = rhs_log.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(m, dtype=np.float64)
    cdef double g1 = gamma - 1.0
    cdef double k1 = K1 - 1.0
    cdef double cg, ce
    cdef double rhs, x, lo, hi, res, dres, xn, step, worst = 0.0
    cdef Py_ssize_t i
    cdef int it

    for i in range(m):
        rhs = rhs_log[i]
        cg = gamma / T[i]
        ce = eps * K1 / T[i]
        hi = rhs
        lo = rhs - 1.0
        step = 1.0
        while lo + cg * exp(g1 * lo) + ce * exp(k1 * lo) - rhs > 0.0:
            step *= 2.0
            lo -= step
        x = rhs - cg * exp(g1 * (rhs if rhs < 0.0 else 0.0))
        if x < lo:
            x = lo
        if x > hi:
            x = hi
        res = x + cg * exp(g1 * x) + ce * exp(k1 * x) - rhs
        for it in range(maxit):
            if fabs(res) <= tol:
                break
            if res > 0.0:
                if x < hi:
                    hi = x
            elif res < 0.0:
                if x > lo:
                    lo = x
            dres = 1.0 + cg * g1 * exp(g1 * x) + ce * k1 * exp(k1 * x)
            xn = x - res / dres
            if not (xn > lo and xn < hi):
                xn = 0.5 * (lo + hi)
            x = xn
            res = x + cg * exp(g1 * x) + ce * exp(k1 * x) - rhs
        if fabs(res) > worst:
            worst = fabs(res)
        out[i] = x
    if worst > 10.0 * tol:
        raise FloatingPointError(
            "density inversion did not converge: worst residual %.3e" % worst)
    return out


def saturation_solve_default(cnp.ndarray[cnp.float64_t, ndim=1] f_prev,
                             cnp.ndarray[cnp.float64_t, ndim=1] p,
                             double tau, double sigma, double A, double B,
                             double c_p, double k_p, double eps_log,
                             cnp.ndarray[cnp.float64_t, ndim=1] s_init,
                             double tol=1e-13, int maxit=100):
    """Per-cell root of (f(s) - f_prev)/tau + sigma*(P_ce(s) + p) = 0 on (0, 1)."""
    cdef Py_ssize_t m = f_prev.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(m, dtype=np.float64)
    cdef double s, lo, hi, res, dres, sn, scale, fp, pv
    cdef Py_ssize_t i
    cdef int it, ok

    if sigma == 0.0:
        for i in range(m):
            out[i] = s_init[i]
        return out

    for i in range(m):
        fp = f_prev[i]
        pv = p[i]
        lo = 1e-15
        hi = 1.0 - 1e-16
        s = s_init[i]
        if s < 1e-12:
            s = 1e-12
        if s > 1.0 - 1e-12:
            s = 1.0 - 1e-12
        scale = 1.0 / tau + sigma * (fabs(pv) + 1.0)
        res = (A + B * log1p(-s) - fp) / tau + sigma * (c_p * pow(s, -k_p) + pv)
        if eps_log != 0.0:
            res -= sigma * eps_log * log(s)
        ok = 0
        for it in range(maxit):
            if fabs(res) <= tol * scale:
                ok = 1
                break
            if res < 0.0:
                if s < hi:
                    hi = s
            else:
                if s > lo:
                    lo = s
            dres = -B / ((1.0 - s) * tau) - sigma * c_p * k_p * pow(s, -k_p - 1.0)
            if eps_log != 0.0:
                dres -= sigma * eps_log / s
            sn = s - res / dres
            if not (sn > lo and sn < hi):
                sn = 0.5 * (lo + hi)
            s = sn
            res = (A + B * log1p(-s) - fp) / tau + sigma * (c_p * pow(s, -k_p) + pv)
            if eps_log != 0.0:
                res -= sigma * eps_log * log(s)
            if hi - lo <= 1e-16 * (s if s > 1e-3 else 1e-3):
                ok = 1
                break
        if not ok and fabs(res) > 1e6 * tol * scale and hi - lo > 1e-12:
            raise FloatingPointError(
                "saturation update did not converge: residual %.3e at cell %d"
                % (fabs(res), i))
        out[i] = s
    return out
