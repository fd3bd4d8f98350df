"""Residual and analytic Jacobian of one implicit Euler step.

Unknown layout: per cell, N entropy variables z_i = mu_i/T followed by
w = log T; cell c owns the slice [c*(N+1), (c+1)*(N+1)).  The saturation is
eliminated cell-locally inside the residual, so its sensitivity enters the
Jacobian through dS/dp only.

The homotopy weight sigma multiplies every physical term (time differences,
transport, sources, boundary data) while the eps/delta regularizers stay at
full strength; sigma = 0 therefore has the exact solution z = 0, w = 0.
"""
from __future__ import annotations

from types import SimpleNamespace

import numpy as np
import scipy.sparse as sp

from .state import EntropyState, Problem, derive_fields, eliminate


def pack(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.concatenate([z, w[:, None]], axis=1).ravel()


def unpack(U: np.ndarray, N: int):
    V = U.reshape(-1, N + 1)
    return np.ascontiguousarray(V[:, :N]), np.ascontiguousarray(V[:, N])


def _stack(d_dz, d_dw):
    """Concatenate z- and w-derivative blocks along a trailing var axis."""
    return np.concatenate([d_dz, d_dw[..., None]], axis=-1)


class Assembler:
    """Builds the strong-form residual (per unit volume) and its Jacobian."""

    def __init__(self, problem: Problem):
        self.problem = problem
        g = problem.grid
        pr = problem.params
        self.N = pr.N
        self.B = pr.N + 1
        self.fw = g.face_area / g.cell_volume
        self.bw = g.bface_area / g.cell_volume
        self.lap = problem.lap.tocsr()
        self.lap2 = (self.lap @ self.lap).tocsr()
        self._const_jac = self._build_constant_jacobian()
        self._prev = None

    # -- constant regularizer blocks: eps*(-lap + I) and delta*lap^2 per species
    def _build_constant_jacobian(self):
        pr = self.problem.params
        B, N = self.B, self.N
        rows, cols, vals = [], [], []
        if pr.eps > 0.0:
            lc = self.lap.tocoo()
            for i in range(N):
                rows.append(lc.row * B + i)
                cols.append(lc.col * B + i)
                vals.append(-pr.eps * lc.data)
            cells = np.arange(self.problem.grid.ncells)
            for i in range(N):
                rows.append(cells * B + i)
                cols.append(cells * B + i)
                vals.append(np.full(cells.size, pr.eps))
        if pr.delta > 0.0:
            l2 = self.lap2.tocoo()
            for i in range(N):
                rows.append(l2.row * B + i)
                cols.append(l2.col * B + i)
                vals.append(pr.delta * l2.data)
        if not rows:
            return None
        return (np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))

    def begin_step(self, state_prev: EntropyState):
        """Cache the previous-state quantities entering the time differences.

        Also fixes the residual scale for this step: the time-difference
        terms carry a 1/tau factor of the state magnitudes, so the
        convergence test works on residual/scale (tolerances are 'absolute,
        scaled').
        """
        pr = self.problem.params
        pf = derive_fields(state_prev, self.problem)
        self._prev = SimpleNamespace(
            S=state_prev.S.copy(),
            Srho=state_prev.S[:, None] * pf.rho,
            Ef=pf.Ef.copy(),
            Es=pf.Es.copy(),
        )
        phi = self.problem.phi
        self.res_scale = max(
            1.0,
            float(np.max(phi * state_prev.S * pf.rho.sum(axis=1))) / pr.tau,
            float(np.max(phi * np.abs(pf.Ef) + (1.0 - phi) * np.abs(pf.Es))) / pr.tau,
        )
        return self._prev

    # ------------------------------------------------------------------
    def residual(self, z, w, sigma=1.0):
        R, _, cf = self._assemble(z, w, sigma, need_jac=False)
        return R, cf

    def residual_and_jacobian(self, z, w, sigma=1.0):
        return self._assemble(z, w, sigma, need_jac=True)

    # ------------------------------------------------------------------
    def _assemble(self, z, w, sigma, need_jac):
        if self._prev is None:
            raise RuntimeError("call begin_step(state_prev) before assembling")
        pb = self.problem
        pr = pb.params
        g = pb.grid
        N, B = self.N, self.B
        M = g.ncells
        eps, delta, tau = pr.eps, pr.delta, pr.tau
        phi = pb.phi
        prev = self._prev

        cf = eliminate(z, w, prev.S, sigma, pb, need_derivatives=need_jac)
        T, invT = cf.T, cf.invT

        a, b = g.face_left, g.face_right
        h = g.face_h
        fw = self.fw

        # face gradients and arithmetic means
        gz = (z[b] - z[a]) / h[:, None]
        gq = (invT[b] - invT[a]) / h
        gp = (cf.p[b] - cf.p[a]) / h
        gw = (w[b] - w[a]) / h
        rhobar = 0.5 * (cf.rho[a] + cf.rho[b])
        lambar = 0.5 * (cf.lam[a] + cf.lam[b])
        e_cell = cf.rhoe + cf.p
        ebar = 0.5 * (e_cell[a] + e_cell[b])
        Lbar = 0.5 * (cf.Lmat[a] + cf.Lmat[b])
        Li0bar = 0.5 * (cf.Li0[a] + cf.Li0[b])
        L00bar = 0.5 * (cf.L00[a] + cf.L00[b])
        c1 = 1.0 + T
        c1bar = 0.5 * (c1[a] + c1[b])
        cK3 = T ** (-pr.K3)
        cK3bar = 0.5 * (cK3[a] + cK3[b])

        v = -pr.K * lambar * gp
        Jdiff = Li0bar * gq[:, None] - np.einsum("fij,fj->fi", Lbar, gz)
        Fm = rhobar * v[:, None] + Jdiff
        qflux = L00bar * gq + np.einsum("fj,fj->f", Li0bar, gz)
        Fe = ebar * v + qflux

        Rm = sigma * ((phi / tau)[:, None] * (cf.S[:, None] * cf.rho - prev.Srho)
                      - cf.r_eps)
        Re = sigma * (phi / tau * (cf.Ef - prev.Ef)
                      + (1.0 - phi) / tau * (cf.Es - prev.Es))

        wmass = sigma * Fm * fw[:, None]
        np.add.at(Rm, a, wmass)
        np.add.at(Rm, b, -wmass)
        wen = sigma * Fe * fw
        np.add.at(Re, a, wen)
        np.add.at(Re, b, -wen)

        # physical boundary fluxes
        bc = g.bface_cell
        if pb.has_b:
            drive = z[bc] - (pb.mu0 / pr.T0)[None, :]
            Fb = drive @ pb.b.T
            np.add.at(Rm, bc, sigma * Fb * self.bw[:, None])
        if pr.alpha > 0.0:
            np.add.at(Re, bc, sigma * pr.alpha * (T[bc] - pr.T0) * self.bw)

        # eps/delta regularizers (unweighted by sigma)
        if eps > 0.0:
            for i in range(N):
                Rm[:, i] += eps * (z[:, i] - self.lap @ z[:, i])
            f1 = c1bar * gw
            phi_w = np.abs(gw) ** (pr.K3 - 1.0) * gw
            f3 = cK3bar * phi_w
            wreg = eps * (f1 + f3) * fw
            np.subtract.at(Re, a, wreg)
            np.add.at(Re, b, wreg)
            Re += eps * (1.0 + cK3) * w
        if delta > 0.0:
            for i in range(N):
                Rm[:, i] += delta * (self.lap2 @ z[:, i])
            Lw = self.lap @ w
            Re += delta * (self.lap @ (c1 * Lw))
            f4 = c1bar * gw ** 2 * gw
            wreg = delta * f4 * fw
            np.subtract.at(Re, a, wreg)
            np.add.at(Re, b, wreg)

        R = np.concatenate([Rm, Re[:, None]], axis=1).ravel()
        if not need_jac:
            return R, None, cf

        # ------------------------------------------------------- Jacobian
        rows_l, cols_l, vals_l = [], [], []

        def push(rows, cols, vals):
            rows_l.append(np.asarray(rows).ravel())
            cols_l.append(np.asarray(cols).ravel())
            vals_l.append(np.asarray(vals).ravel())

        # local (cell-diagonal) blocks
        Jloc = np.zeros((M, B, B))
        pt = sigma * phi / tau
        for i in range(N):
            Jloc[:, i, :N] = pt[:, None] * (cf.rho[:, i, None] * cf.dS_dz
                                            + cf.S[:, None] * cf.drho_dz[:, i, :]) \
                - sigma * cf.dr_dz[:, i, :]
            Jloc[:, i, N] = pt * (cf.rho[:, i] * cf.dS_dw + cf.S * cf.drho_dw[:, i]) \
                - sigma * cf.dr_dw[:, i]
        Jloc[:, N, :N] = pt[:, None] * cf.dEf_dz
        Jloc[:, N, N] = pt * cf.dEf_dw + sigma * (1.0 - phi) / tau * cf.dEs_dw
        if eps > 0.0:
            Jloc[:, N, N] += eps * ((1.0 + cK3) + w * (-pr.K3 * cK3))

        # boundary terms land on local blocks of the owner cells
        if pb.has_b:
            for i in range(N):
                for l in range(N):
                    np.add.at(Jloc, (bc, i, l), sigma * pb.b[i, l] * self.bw)
        if pr.alpha > 0.0:
            np.add.at(Jloc, (bc, N, N), sigma * pr.alpha * T[bc] * self.bw)

        cells = np.arange(M)
        rr = (cells[:, None, None] * B + np.arange(B)[None, :, None])
        cc = (cells[:, None, None] * B + np.arange(B)[None, None, :])
        push(np.broadcast_to(rr, Jloc.shape), np.broadcast_to(cc, Jloc.shape), Jloc)

        # constant regularizer blocks
        if self._const_jac is not None:
            push(*self._const_jac)

        # ---- face terms; var axis order is (z_0..z_{N-1}, w)
        Dp = _stack(cf.dp_dz, cf.dp_dw)
        Drho = _stack(cf.drho_dz, cf.drho_dw)
        Dlam = _stack(cf.dlam_dz, cf.dlam_dw)
        De = Dp + _stack(cf.drhoe_dz, cf.drhoe_dw)
        DL = _stack(cf.dLmat_dz, cf.dLmat_dw)
        DLi0 = _stack(cf.dLi0_dz, cf.dLi0_dw)

        hB = h[:, None]
        dgp_a = -Dp[a] / hB
        dgp_b = Dp[b] / hB
        dv_a = -pr.K * (0.5 * Dlam[a] * gp[:, None] + lambar[:, None] * dgp_a)
        dv_b = -pr.K * (0.5 * Dlam[b] * gp[:, None] + lambar[:, None] * dgp_b)
        dgq_a = np.zeros((a.size, B))
        dgq_b = np.zeros((a.size, B))
        dgq_a[:, N] = invT[a] / h
        dgq_b[:, N] = -invT[b] / h

        def face_push(row, DFa, DFb, mult):
            ra = a * B + row
            rb = b * B + row
            ca = a[:, None] * B + np.arange(B)[None, :]
            cb = b[:, None] * B + np.arange(B)[None, :]
            wa = mult * DFa * fw[:, None]
            wb = mult * DFb * fw[:, None]
            push(np.broadcast_to(ra[:, None], wa.shape), ca, wa)
            push(np.broadcast_to(rb[:, None], wa.shape), ca, -wa)
            push(np.broadcast_to(ra[:, None], wb.shape), cb, wb)
            push(np.broadcast_to(rb[:, None], wb.shape), cb, -wb)

        for i in range(N):
            dJ_a = (0.5 * DLi0[a][:, i, :] * gq[:, None] + Li0bar[:, i, None] * dgq_a
                    - 0.5 * np.einsum("fjv,fj->fv", DL[a][:, i, :, :], gz))
            dJ_b = (0.5 * DLi0[b][:, i, :] * gq[:, None] + Li0bar[:, i, None] * dgq_b
                    - 0.5 * np.einsum("fjv,fj->fv", DL[b][:, i, :, :], gz))
            dJ_a[:, :N] += Lbar[:, i, :] / hB
            dJ_b[:, :N] -= Lbar[:, i, :] / hB
            DFa = 0.5 * Drho[a][:, i, :] * v[:, None] + rhobar[:, i, None] * dv_a + dJ_a
            DFb = 0.5 * Drho[b][:, i, :] * v[:, None] + rhobar[:, i, None] * dv_b + dJ_b
            face_push(i, DFa, DFb, sigma)

        dq_a = L00bar[:, None] * dgq_a + 0.5 * np.einsum("fjv,fj->fv", DLi0[a], gz)
        dq_b = L00bar[:, None] * dgq_b + 0.5 * np.einsum("fjv,fj->fv", DLi0[b], gz)
        dq_a[:, N] += 0.5 * cf.dL00_dw[a] * gq
        dq_b[:, N] += 0.5 * cf.dL00_dw[b] * gq
        dq_a[:, :N] -= Li0bar / hB
        dq_b[:, :N] += Li0bar / hB
        DFa = 0.5 * De[a] * v[:, None] + ebar[:, None] * dv_a + dq_a
        DFb = 0.5 * De[b] * v[:, None] + ebar[:, None] * dv_b + dq_b
        face_push(N, DFa, DFb, sigma)

        # eps/delta energy regularizer face terms (w-w coupling only)
        if eps > 0.0 or delta > 0.0:
            DRa = np.zeros((a.size, B))
            DRb = np.zeros((a.size, B))
            if eps > 0.0:
                phi_p = pr.K3 * np.abs(gw) ** (pr.K3 - 1.0)
                phi_w = np.abs(gw) ** (pr.K3 - 1.0) * gw
                DRa[:, N] += eps * (0.5 * T[a] * gw - c1bar / h
                                    + 0.5 * (-pr.K3 * cK3[a]) * phi_w
                                    - cK3bar * phi_p / h)
                DRb[:, N] += eps * (0.5 * T[b] * gw + c1bar / h
                                    + 0.5 * (-pr.K3 * cK3[b]) * phi_w
                                    + cK3bar * phi_p / h)
            if delta > 0.0:
                DRa[:, N] += delta * (0.5 * T[a] * gw ** 3 - 3.0 * c1bar * gw ** 2 / h)
                DRb[:, N] += delta * (0.5 * T[b] * gw ** 3 + 3.0 * c1bar * gw ** 2 / h)
            # regularizer fluxes enter the residual as -div(...): flip the sign
            face_push(N, -DRa, -DRb, 1.0)

        # delta bi-Laplacian of w with (1+T) weight: lap @ diag(1+T) @ lap
        if delta > 0.0:
            Lw = self.lap @ w
            Jb = (self.lap @ sp.diags(c1) @ self.lap
                  + self.lap @ sp.diags(T * Lw)).tocoo()
            push(Jb.row * B + N, Jb.col * B + N, delta * Jb.data)

        J = sp.coo_matrix(
            (np.concatenate(vals_l), (np.concatenate(rows_l), np.concatenate(cols_l))),
            shape=(M * B, M * B)).tocsr()
        return R, J, cf


# ---------------------------------------------------------------------------
# public residual blocks (the spec's module surface)


def assemble_mass_residual(state_k: EntropyState, state_km1: EntropyState,
                           problem: Problem, sigma: float = 1.0) -> np.ndarray:
    """Strong-form per-volume residual of the species mass equations, (M, N).

    The saturation inside the residual is re-eliminated from state_k's
    pressure (consistent with the solver); for an accepted step this matches
    the stored saturation to root-find tolerance.
    """
    asm = Assembler(problem)
    asm.begin_step(state_km1)
    R, _ = asm.residual(state_k.z, state_k.w, sigma)
    return R.reshape(-1, problem.params.N + 1)[:, : problem.params.N].copy()


def assemble_energy_residual(state_k: EntropyState, state_km1: EntropyState,
                             problem: Problem, sigma: float = 1.0) -> np.ndarray:
    """Strong-form per-volume residual of the energy equation, (M,)."""
    asm = Assembler(problem)
    asm.begin_step(state_km1)
    R, _ = asm.residual(state_k.z, state_k.w, sigma)
    return R.reshape(-1, problem.params.N + 1)[:, problem.params.N].copy()
