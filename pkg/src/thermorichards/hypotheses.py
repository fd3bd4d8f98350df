"""Runtime validation of the structural hypotheses on parameters and closures.

Every inequality the analysis rests on is sampled on deterministic grids and
random draws; the report carries a pass/fail verdict plus the worst witness
for each named hypothesis.  Constants that the theory leaves implicit (the
capillary coupling constant, the saturation-floor constant lambda0, Onsager
bounds) are estimated and reported rather than asserted against fixed values.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.integrate import quad

from .closures import ClosureSet, apply_projector
from .params import ModelParams


@dataclass
class HypothesisCheck:
    name: str
    passed: bool
    detail: str
    witness: Optional[str] = None


@dataclass
class HypothesisReport:
    checks: List[HypothesisCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> List[HypothesisCheck]:
        return [c for c in self.checks if not c.passed]

    def failed_names(self) -> List[str]:
        return [c.name for c in self.failures()]

    def __str__(self) -> str:
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            line = f"[{status}] {c.name}: {c.detail}"
            if c.witness and not c.passed:
                line += f"  (witness: {c.witness})"
            lines.append(line)
        return "\n".join(lines)


def _small_s_slope(fn, s_lo=1e-8, s_hi=1e-6):
    """Log-log slope of fn near s = 0; ~0 means a finite positive limit."""
    v0, v1 = float(fn(s_lo)), float(fn(s_hi))
    if v0 <= 0.0 or v1 <= 0.0 or not (np.isfinite(v0) and np.isfinite(v1)):
        return np.inf, v0
    slope = (np.log(v1) - np.log(v0)) / (np.log(s_hi) - np.log(s_lo))
    return slope, v0


def validate_hypotheses(params: ModelParams, closures: ClosureSet,
                        n_samples: int = 200, seed: int = 12345) -> HypothesisReport:
    rng = np.random.default_rng(seed)
    rep = HypothesisReport()
    add = rep.checks.append
    N = params.N

    # (gamma)
    add(HypothesisCheck(
        "gamma", params.gamma > 2.0,
        f"gamma = {params.gamma} must exceed 2"))

    # (hp.kr): admissible exponent window and positive limit of s^-alpha_r k_r(s)
    in_window = 2.0 / params.gamma < params.alpha_r < 14.0 / 3.0
    slope, lim = _small_s_slope(lambda s: closures.kr(s) * s ** (-params.alpha_r))
    has_limit = abs(slope) < 0.02 and lim > 0.0
    sgrid = np.linspace(-0.5, 1.5, 513)
    vals = closures.kr(sgrid)
    shape_ok = (
        np.all(vals >= -1e-14) and np.all(vals <= 1.0 + 1e-14)
        and np.all(np.diff(vals) >= -1e-14)
        and np.all(np.abs(closures.kr(sgrid[sgrid <= 0.0])) <= 1e-14)
        and np.all(np.abs(closures.kr(sgrid[sgrid >= 1.0]) - 1.0) <= 1e-14)
    )
    add(HypothesisCheck(
        "hp_kr", in_window and has_limit and shape_ok,
        f"alpha_r = {params.alpha_r} in (2/gamma, 14/3) = "
        f"({2.0 / params.gamma:.4g}, {14.0 / 3.0:.4g}); "
        f"s^-alpha_r k_r -> {lim:.4g} (log-slope {slope:.3g}); "
        f"k_r in [0,1], increasing, 0 below 0 and 1 above 1",
        witness=None if in_window else f"alpha_r = {params.alpha_r}"))

    # (hp.Pcf): q window and uniform lower bound on |Pc'| k_r^{q/(2(q-1))} / |f'|
    q_ok = params.gamma / (params.gamma - 1.0) <= params.q < 2.0
    expo = params.q / (2.0 * (params.q - 1.0))

    def pcf_ratio(s):
        return (np.abs(closures.pc.prime(s)) * closures.kr(s) ** expo
                / np.abs(closures.f.prime(s)))

    grid = np.geomspace(1e-8, 0.5, 512)
    ratios = pcf_ratio(grid)
    c_f = float(np.min(ratios))
    slope_pcf, _ = _small_s_slope(pcf_ratio)
    decays = slope_pcf > 0.02   # ratio -> 0 as s -> 0 means the infimum is 0
    add(HypothesisCheck(
        "hp_Pcf", q_ok and c_f > 0.0 and not decays,
        f"q = {params.q} in [gamma/(gamma-1), 2); inf ratio c_f ~= {c_f:.4g} "
        f"(small-s log-slope {slope_pcf:.3g})",
        witness=f"ratio at s = {grid[int(np.argmin(ratios))]:.3g}"))

    # (hp.krf): f(1-) = -inf and |d sqrt(kr)/ds| <= c_f' |f'|
    f_near_1 = float(closures.f(1.0 - 1e-12))
    blows_down = f_near_1 < -10.0
    sg = np.linspace(1e-6, 1.0 - 1e-6, 2048)
    dsqrt_kr = np.abs(0.5 * closures.kr.prime(sg) / np.sqrt(np.maximum(closures.kr(sg), 1e-300)))
    ratio = dsqrt_kr / np.abs(closures.f.prime(sg))
    c_fp = float(np.max(ratio))
    add(HypothesisCheck(
        "hp_krf", blows_down and np.isfinite(c_fp),
        f"f(1-) ~ {f_near_1:.4g} (must diverge to -inf); sup |d sqrt(kr)/ds| / |f'| "
        f"= c_f' ~= {c_fp:.4g}",
        witness=f"s = {sg[int(np.argmax(ratio))]:.4g}"))

    # (hp.Pcf2): f(0) > 0, P_c > 0, lambda0 > p_at / f(0)
    f0 = float(closures.f(0.0))
    pc_grid = closures.pc(np.geomspace(1e-8, 1.0 - 1e-8, 512))
    pc_pos = bool(np.all(pc_grid > 0.0))
    s_hi = closures._f_positive_sup()
    lam_grid = np.geomspace(1e-10, s_hi, 4096)
    lam0 = float(np.min(closures.pc(lam_grid) / closures.f(lam_grid)))
    lam_ok = f0 > 0.0 and lam0 > params.p_at / f0
    add(HypothesisCheck(
        "hp_Pcf2", f0 > 0.0 and pc_pos and lam_ok,
        f"f(0) = {f0:.4g} > 0; P_c > 0; lambda0 ~= {lam0:.4g} must exceed "
        f"p_at/f(0) = {params.p_at / f0 if f0 > 0 else np.inf:.4g}",
        witness=f"s0 = {s_hi:.4g}"))

    # (hp.Pc.bound): s^{k_p} P_c(s) -> c_p
    slope_pb, lim_pb = _small_s_slope(lambda s: closures.pc(s) * s ** params.k_p)
    pb_ok = abs(slope_pb) < 0.02 and lim_pb > 0.0
    add(HypothesisCheck(
        "hp_Pc_bound", pb_ok,
        f"s^k_p P_c(s) -> {lim_pb:.4g} (log-slope {slope_pb:.3g}), k_p = {params.k_p}"))

    # (lb.dfeps): inf |f'| > 0 and integrability of |f'| |log u| near 0
    inf_fp = float(np.min(np.abs(closures.f.prime(np.linspace(1e-9, 1 - 1e-9, 4096)))))
    integral, _ = quad(lambda u: abs(float(closures.f.prime(u))) * abs(np.log(u)),
                       1e-12, 0.5, limit=200)
    add(HypothesisCheck(
        "lb_dfeps", inf_fp > 0.0 and np.isfinite(integral),
        f"inf |f'| ~= {inf_fp:.4g} > 0; int_0^0.5 |f'||log u| du ~= {integral:.4g}"))

    # (kappa): kappa1 (1+T^beta) <= kappa(T) <= kappa2 (1+T^beta)
    Tg = np.geomspace(1e-3, 1e3, 512)
    kr_ratio = closures.kappa(Tg) / (1.0 + Tg ** params.beta)
    kap1, kap2 = float(np.min(kr_ratio)), float(np.max(kr_ratio))
    add(HypothesisCheck(
        "kappa", kap1 > 0.0 and np.isfinite(kap2),
        f"kappa(T)/(1+T^beta) in [{kap1:.4g}, {kap2:.4g}] over T in [1e-3, 1e3]"))

    # (hp.beta)
    beta_ok = (params.beta >= params.q / (2.0 - params.q)
               and params.beta > params.gamma / (params.gamma - 2.0)
               and params.beta >= 4.0 / 3.0)
    add(HypothesisCheck(
        "hp_beta", beta_ok,
        f"beta = {params.beta} must satisfy beta >= q/(2-q) = "
        f"{params.q / (2.0 - params.q):.4g}, beta > gamma/(gamma-2) = "
        f"{params.gamma / (params.gamma - 2.0):.4g}, beta >= 4/3"))

    # (hp.Ltilde) and (Ass.L): sampled over random states and directions
    M = n_samples
    rho_s = rng.uniform(1e-3, 10.0, size=(M, N))
    T_s = rng.uniform(1e-2, 1e2, size=M)
    u_s = rng.standard_normal((M, N))
    L = closures.onsager.lmat(rho_s, T_s)
    Li0 = closures.onsager.li0(rho_s, T_s)
    bound = float(np.max(np.abs(L)) + np.max(np.abs(Li0) / T_s[:, None]))
    add(HypothesisCheck(
        "hp_Ltilde", np.isfinite(bound),
        f"sup(|L_ij| + |L_i0|/T) ~= {bound:.4g} over sampled states"))

    sym_err = float(np.max(np.abs(L - np.swapaxes(L, 1, 2))))
    colsum = float(np.max(np.abs(L.sum(axis=1))))
    quad_form = np.einsum("mij,mi,mj->m", L, u_s, u_s)
    proj_sq = np.sum(apply_projector(u_s) ** 2, axis=1)
    nz = proj_sq > 1e-20
    if N == 1:
        ass_ok = bool(np.all(np.abs(quad_form) <= 1e-12)) and sym_err <= 1e-12
        c_lo = c_hi = 0.0
    else:
        ratio_lu = quad_form[nz] / proj_sq[nz]
        c_lo, c_hi = float(np.min(ratio_lu)), float(np.max(ratio_lu))
        ass_ok = sym_err <= 1e-12 and colsum <= 1e-10 and c_lo > 1e-10 and np.isfinite(c_hi)
    add(HypothesisCheck(
        "Ass_L", ass_ok,
        f"L symmetric (err {sym_err:.2g}), zero column sums (err {colsum:.2g}), "
        f"C = {c_lo:.4g} <= u.Lu/|Pi u|^2 <= C' = {c_hi:.4g}"))

    # (hp.b): constant symmetric PSD matrix with zero column sums
    b = np.asarray(closures.b, dtype=float)
    b_sym = float(np.max(np.abs(b - b.T))) if b.size else 0.0
    b_col = float(np.max(np.abs(b.sum(axis=0)))) if b.size else 0.0
    b_eig = float(np.min(np.linalg.eigvalsh(0.5 * (b + b.T)))) if b.size else 0.0
    b_ok = b.shape == (N, N) and b_sym <= 1e-12 and b_col <= 1e-12 and b_eig >= -1e-12
    add(HypothesisCheck(
        "hp_b", b_ok,
        f"b symmetric (err {b_sym:.2g}), PSD (min eig {b_eig:.2g}), "
        f"column sums zero (err {b_col:.2g})",
        witness=None if b_ok else f"column sums {b.sum(axis=0) if b.size else '[]'}"))

    # (hp.r)-(hp.r.3): mass conservation, dissipativity, convexity
    zeta_s = rng.standard_normal((M, N)) * rng.uniform(0.1, 5.0, size=(M, 1))
    rt = closures.reactions(rho_s.sum(axis=1), T_s, apply_projector(zeta_s))
    sum_err = float(np.max(np.abs(rt.sum(axis=1))))
    add(HypothesisCheck(
        "hp_r", sum_err <= 1e-12,
        f"sum_j r_j = 0 sampled (max err {sum_err:.2g})"))

    C1 = getattr(closures.reactions, "C1", None)
    diss = np.einsum("mi,mi->m", rt, zeta_s)
    if C1 is not None:
        pnorm = np.linalg.norm(apply_projector(zeta_s), axis=1) ** params.a
        margin = diss + C1 * pnorm
        diss_ok = bool(np.all(margin <= 1e-10))
        detail = (f"sum r_j zeta_j <= -C1 |Pi zeta|^a with C1 = {C1} "
                  f"(max violation {float(np.max(margin)):.2g})")
    else:
        diss_ok = bool(np.all(diss <= 1e-10))
        detail = f"sum r_j zeta_j <= 0 sampled (max {float(np.max(diss)):.2g})"
    add(HypothesisCheck("hp_r2", diss_ok, detail))

    za, zb = zeta_s[: M // 2], zeta_s[M // 2: 2 * (M // 2)]
    rho_h, T_h = rho_s[: M // 2].sum(axis=1), T_s[: M // 2]

    def neg_diss(zv):
        r = closures.reactions(rho_h, T_h, apply_projector(zv))
        return -np.einsum("mi,mi->m", r, zv)

    mid_gap = neg_diss(0.5 * (za + zb)) - 0.5 * (neg_diss(za) + neg_diss(zb))
    add(HypothesisCheck(
        "hp_r3", bool(np.all(mid_gap <= 1e-10)),
        f"midpoint convexity of zeta -> -sum r_j zeta_j (max gap "
        f"{float(np.max(mid_gap)):.2g})"))

    # (hp.K123)
    lo1, hi1 = params.k1_bounds()
    k123_ok = (lo1 < params.K1 < hi1 and 3.0 < params.K2 < 3.0 * params.beta
               and params.K3 > params.k3_lower_bound())
    add(HypothesisCheck(
        "hp_K123", k123_ok,
        f"K1 = {params.K1} in ({lo1:.4g}, {hi1:.4g}); K2 = {params.K2} in "
        f"(3, {3.0 * params.beta:.4g}); K3 = {params.K3} > "
        f"{params.k3_lower_bound():.4g}"))

    # (Phi.pos): porosity bounded away from 0 and 1
    pts = rng.uniform(0.0, 1.0, size=(max(n_samples, 64), 3))
    phi_vals = np.asarray(closures.phi(pts), dtype=float)
    phi_lo, phi_hi = float(np.min(phi_vals)), float(np.max(phi_vals))
    add(HypothesisCheck(
        "phi_pos", phi_lo > 0.0 and phi_hi < 1.0,
        f"porosity range [{phi_lo:.4g}, {phi_hi:.4g}] must stay inside (0, 1)",
        witness=None if phi_lo > 0.0 and phi_hi < 1.0 else f"phi = {phi_hi}"))

    # saturation floor guard for the chosen eps (used again at config load)
    eps_max = closures.sat_floor_bound(params.p_at)
    add(HypothesisCheck(
        "sat_floor_guard", params.eps < eps_max or params.eps == 0.0,
        f"eps = {params.eps} must stay below f^-1(p_at/lambda0) ~= {eps_max:.4g}"))

    return rep
