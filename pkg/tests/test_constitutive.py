"""Thermodynamic consistency of the constitutive layer."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermorichards.closures import default_closures
from thermorichards.constitutive import (DomainError, capillary_pressure_reg,
                                         chemical_potentials,
                                         densities_from_entropy_vars,
                                         entropy_production_rate,
                                         free_energy_water, internal_energy,
                                         interfacial_and_fluid_energy,
                                         mobility, onsager_fluxes, pressure,
                                         projector, reaction_terms,
                                         skeleton_entropy_energy, thermo_point,
                                         water_entropy)
from thermorichards.params import ModelParams

from oracles import central_diff


def p_basic(N=1, **kw):
    kw.setdefault("p_at", 1.0)
    return ModelParams(N=N, mu0=tuple([0.0] * N), **kw)


class TestClosedFormPoints:
    def test_free_energy_unit_point(self):
        # log terms vanish at rho = T = 1: T*0 + 1 - 0 + 1
        val = free_energy_water(np.array([1.0]), 1.0, 0.0, p_basic())
        assert val == pytest.approx(2.0, abs=1e-15)

    def test_free_energy_at_e(self):
        e = np.e
        val = free_energy_water(np.array([e]), 1.0, 0.0, p_basic())
        assert val == pytest.approx(e + e ** 3 + 1.0, rel=1e-15)

    def test_chemical_potential_unit(self):
        mu = chemical_potentials(np.array([1.0]), 1.0, 0.0, p_basic())
        assert mu[0] == pytest.approx(4.0, abs=1e-15)

    def test_chemical_potential_two_species(self):
        mu = chemical_potentials(np.array([1.0, 1.0]), 1.0, 0.0, p_basic(N=2))
        assert np.allclose(mu, 13.0, atol=1e-13)

    def test_pressure_point(self):
        val = pressure(np.array([1.0]), 2.0, 0.0, p_basic())
        assert val == pytest.approx(3.0, abs=1e-14)

    def test_pressure_vacuum_limit(self):
        val = pressure(np.array([1e-12]), 1.7, 0.0, p_basic())
        assert val == pytest.approx(-1.0, abs=1e-10)

    def test_internal_energy_point(self):
        val = internal_energy(np.array([1.0]), 1.0, 0.0, p_basic())
        assert val == pytest.approx(3.0, abs=1e-15)

    def test_internal_energy_vacuum(self):
        val = internal_energy(np.array([1e-14]), 2.3, 0.0, p_basic())
        assert val == pytest.approx(1.0, abs=1e-12)

    def test_entropy_points(self):
        assert water_entropy(np.array([1.0]), 1.0, p_basic()) == pytest.approx(1.0)
        assert water_entropy(np.array([1.0, 1.0]), 1.0, p_basic(N=2)) == pytest.approx(2.0)

    def test_skeleton_point(self):
        eta, ene = skeleton_entropy_energy(1.0, 0.0, p_basic())
        assert eta == pytest.approx(0.0, abs=1e-15)
        assert ene == pytest.approx(1.0)

    def test_skeleton_regularized(self):
        pr = p_basic(K2=6.0)
        eta, ene = skeleton_entropy_energy(1.0, 0.1, pr)
        assert eta == pytest.approx(0.6)
        assert ene == pytest.approx(1.5)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            free_energy_water(np.array([-1.0]), 1.0, 0.0, p_basic())
        with pytest.raises(DomainError):
            chemical_potentials(np.array([1.0]), -1.0, 0.0, p_basic())
        with pytest.raises(DomainError):
            skeleton_entropy_energy(0.0, 0.0, p_basic())


class TestLegendreConsistency:
    """mu_i and (rho e) are derivatives of the free energy; check by FD."""

    @pytest.mark.parametrize("N", [1, 2, 3])
    @pytest.mark.parametrize("eps", [0.0, 0.05])
    def test_mu_is_density_gradient(self, N, eps, rng):
        pr = p_basic(N=N)
        for _ in range(20):
            rho = rng.uniform(0.05, 2.0, size=N)
            T = rng.uniform(0.2, 3.0)
            mu = chemical_potentials(rho, T, eps, pr)
            for i in range(N):
                def f(x, i=i):
                    r = rho.copy()
                    r[i] = x
                    return float(free_energy_water(r, T, eps, pr))
                fd = central_diff(f, rho[i], h=1e-6 * rho[i])
                assert abs(mu[i] - fd) <= 1e-6 * max(abs(mu[i]), 1.0)

    @pytest.mark.parametrize("eps", [0.0, 0.05])
    def test_energy_is_legendre_transform(self, eps, rng):
        pr = p_basic(N=2)
        for _ in range(20):
            rho = rng.uniform(0.05, 2.0, size=2)
            T = rng.uniform(0.2, 3.0)
            rhoe = internal_energy(rho, T, eps, pr)
            def f(t):
                return float(free_energy_water(rho, t, eps, pr))
            val = f(T) - T * central_diff(f, T, h=1e-6 * T)
            assert abs(rhoe - val) <= 1e-6 * max(abs(rhoe), 1.0)

    def test_skeleton_concavity_in_energy(self):
        # regularized skeleton entropy stays concave as a function of the
        # regularized skeleton energy: sampled second differences <= 0
        pr = p_basic(K2=6.0)
        T = np.linspace(0.05, 5.0, 400)
        eta, ene = skeleton_entropy_energy(T, 0.1, pr)
        # second difference along the (ene, eta) curve
        d1 = np.diff(eta) / np.diff(ene)
        assert np.all(np.diff(d1) <= 1e-10)


class TestEulerAndGibbsDuhem:
    @pytest.mark.parametrize("eps", [0.0, 0.03])
    def test_euler_identity(self, eps, rng):
        pr = p_basic(N=3)
        for _ in range(50):
            rho = rng.uniform(0.05, 2.0, size=3)
            T = rng.uniform(0.2, 3.0)
            tp = thermo_point(rho, T, eps, pr)
            scale = max(abs(tp.p), abs(tp.rhoe), 1.0)
            assert abs(tp.euler_residual()) <= 1e-12 * scale

    def test_gibbs_duhem_second_order(self, rng):
        # T*d(rho eta) - d(rho e) + sum mu_i d rho_i = O(|d|^2): the residual
        # must contract by ~4 when the increment halves
        pr = p_basic(N=2)
        rho = np.array([0.4, 0.7])
        T = 1.3
        mu = chemical_potentials(rho, T, 0.0, pr)
        direc_r = np.array([0.3, -0.2])
        direc_T = 0.25

        def resid(s):
            r2 = rho + s * direc_r
            T2 = T + s * direc_T
            d_eta = water_entropy(r2, T2, pr) - water_entropy(rho, T, pr)
            d_e = internal_energy(r2, T2, 0.0, pr) - internal_energy(rho, T, 0.0, pr)
            return float(T * d_eta - d_e + np.dot(mu, s * direc_r))

        r1, r2 = abs(resid(1e-3)), abs(resid(5e-4))
        assert r1 / r2 == pytest.approx(4.0, rel=0.2)


class TestCapillaryEnergies:
    def test_fluid_energy_at_anchor(self):
        pr = p_basic()
        cl = default_closures(pr)
        rho = np.array([0.3])
        _, ef = interfacial_and_fluid_energy(rho, np.asarray(1.0), np.asarray(0.5),
                                             0.0, pr, cl)
        rhoe = internal_energy(rho, np.asarray(1.0), 0.0, pr)
        assert ef == pytest.approx(0.5 * float(rhoe), rel=1e-14)

    def test_fluid_energy_closed_form(self):
        # default P_c = s^-2: int_{1/2}^{1/4} s^-2 ds = [-1/s] = -4 + 2 = -2
        pr = p_basic()
        cl = default_closures(pr)
        rho = np.array([0.3])
        _, ef = interfacial_and_fluid_energy(rho, np.asarray(1.0), np.asarray(0.25),
                                             0.0, pr, cl)
        rhoe = float(internal_energy(rho, np.asarray(1.0), 0.0, pr))
        assert ef == pytest.approx(rhoe * 0.25 + 2.0, rel=1e-13)

    def test_interfacial_derivative_is_minus_pc(self):
        pr = p_basic()
        cl = default_closures(pr)
        rho = np.array([0.3])
        for S in [0.2, 0.5, 0.8]:
            def e_int(s):
                return float(interfacial_and_fluid_energy(
                    rho, np.asarray(1.0), np.asarray(s), 0.0, pr, cl)[0])
            fd = central_diff(e_int, S, h=1e-7)
            assert fd == pytest.approx(-float(cl.pc(S)), rel=1e-6)

    def test_pc_regularization_modes(self):
        pr = p_basic()  # k_p = 2 > 0: no log term
        cl = default_closures(pr)
        assert capillary_pressure_reg(0.5, 0.5, pr, cl) == pytest.approx(4.0)
        pr0 = p_basic(k_p=0.0, K1=5.0)
        from thermorichards.closures import PowerPc
        cl0 = default_closures(pr0)
        cl0.pc = PowerPc(1.0, 0.0)
        # at S -> 1, log(S) -> 0: regularization vanishes
        assert capillary_pressure_reg(1.0 - 1e-14, 0.5, pr0, cl0) == \
            pytest.approx(1.0, rel=1e-10)
        # strict monotone decrease on a fine grid
        s = np.linspace(1e-3, 1 - 1e-3, 1000)
        vals = capillary_pressure_reg(s, 0.5, pr0, cl0)
        assert np.all(np.diff(vals) < 0.0)

    def test_mobility(self):
        pr = p_basic(alpha_r=2.0)
        cl = default_closures(pr)
        assert mobility(-0.5, 1.0, cl) == 0.0
        assert mobility(1.5, 1.0, cl) == pytest.approx(1.0)
        assert mobility(0.5, 1.0, cl) == pytest.approx(0.25)


class TestOnsagerFluxes:
    def test_zero_gradients(self, params2):
        cl = default_closures(params2)
        J, q = onsager_fluxes(np.array([0.3, 0.4]), 1.2,
                              np.zeros((2, 1)), np.zeros(1), cl)
        assert np.all(J == 0.0) and np.all(q == 0.0)

    def test_projector_kills_constant_gradients(self, params3):
        cl = default_closures(params3)
        gz = np.full((3, 2), 0.7)  # same gradient for every species
        J, _ = onsager_fluxes(np.array([0.2, 0.3, 0.4]), 1.0, gz, np.zeros(2), cl)
        assert np.max(np.abs(J)) <= 1e-14

    def test_species_fluxes_sum_to_zero(self, params3, rng):
        cl = default_closures(params3)
        for _ in range(10):
            gz = rng.standard_normal((3, 2))
            gq = rng.standard_normal(2)
            J, _ = onsager_fluxes(rng.uniform(0.1, 1.0, 3),
                                  rng.uniform(0.5, 2.0), gz, gq, cl)
            assert np.max(np.abs(J.sum(axis=0))) <= 1e-13

    def test_production_matches_direct_expansion(self, params3, rng):
        # -sum grad(z_i).J_i + grad(1/T).q must equal the quadratic form with
        # the L_i0 cross terms cancelling identically
        cl = default_closures(params3)
        cl.onsager.c0 = 0.35  # switch cross heat-mass coupling on
        for _ in range(40):
            rho = rng.uniform(0.1, 1.0, 3)
            T = rng.uniform(0.5, 2.0)
            gz = rng.standard_normal((3, 2))
            gq = rng.standard_normal(2)
            J, q = onsager_fluxes(rho, T, gz, gq, cl)
            direct = -np.einsum("id,id->", gz, J) + np.dot(gq, q)
            form = entropy_production_rate(rho, T, gz, gq, cl)
            scale = max(abs(direct), 1.0)
            assert abs(direct - form) <= 1e-12 * scale
            assert form >= -1e-12 * scale


class TestProjector:
    def test_kernel(self):
        Pi = projector(4)
        assert np.max(np.abs(Pi @ np.ones(4))) <= 1e-15

    def test_mean_removal(self):
        Pi = projector(2)
        assert np.allclose(Pi @ np.array([1.0, 3.0]), [-1.0, 1.0])

    @given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=2 ** 31))
    @settings(max_examples=40, deadline=None)
    def test_idempotent_symmetric(self, n, seed):
        Pi = projector(n)
        u = np.random.default_rng(seed).standard_normal(n)
        assert np.max(np.abs(Pi @ (Pi @ u) - Pi @ u)) <= 1e-15
        assert np.max(np.abs(Pi - Pi.T)) == 0.0


class TestReactions:
    def test_constant_zeta_gives_zero_reaction(self, params3):
        cl = default_closures(params3)
        zeta = np.full((1, 3), 2.5)
        r = reaction_terms(1.0, 1.0, zeta, 0.0, params3, cl)
        assert np.max(np.abs(r)) <= 1e-14
        # with eps > 0 the source regularizer still fires on nonzero zeta
        r_eps = reaction_terms(1.0, 1.0, zeta, 0.1, params3, cl)
        assert np.max(np.abs(r_eps)) > 0.0

    def test_zero_zeta(self, params3):
        cl = default_closures(params3)
        r = reaction_terms(1.0, 1.0, np.zeros((1, 3)), 0.1, params3, cl)
        assert np.max(np.abs(r)) == 0.0

    def test_dissipation_identity(self, params3, rng):
        cl = default_closures(params3)
        from thermorichards.closures import apply_projector
        for _ in range(30):
            zeta = rng.standard_normal((1, 3)) * 2.0
            r = reaction_terms(1.0, 1.0, zeta, 0.0, params3, cl)
            got = float(np.sum(r * zeta))
            expect = -float(np.linalg.norm(apply_projector(zeta)) ** params3.a)
            assert got == pytest.approx(expect, rel=1e-12, abs=1e-14)
            assert got <= 0.0


class TestDensityInversion:
    def test_unit_root(self):
        pr = p_basic()
        rho = densities_from_entropy_vars(np.array([4.0]), 0.0, 0.0, pr)
        assert rho[0] == pytest.approx(1.0, rel=1e-13)

    def test_vacuum_limit(self):
        pr = p_basic()
        rho = densities_from_entropy_vars(np.array([-200.0]), 0.0, 0.0, pr)
        assert 0.0 < rho[0] < 1e-80

    def test_roundtrip_against_bisection(self, params2, rng):
        from oracles import bisect
        pr = params2
        for _ in range(25):
            z = rng.standard_normal(2) * 2.0
            w = rng.standard_normal() * 0.7
            T = np.exp(w)
            rho = densities_from_entropy_vars(z, w, 0.02, pr)
            rhs = np.log(np.sum(np.exp(z))) + pr.c_w * w - 1.0

            def h(x):
                return (x + (pr.gamma * np.exp((pr.gamma - 1.0) * x)
                             + 0.02 * pr.K1 * np.exp((pr.K1 - 1.0) * x)) / T) - rhs

            x_ref = bisect(h, rhs - 60.0, rhs + 1.0, tol=1e-15)
            assert np.log(rho.sum()) == pytest.approx(x_ref, abs=1e-12)

    @pytest.mark.parametrize("N", [1, 2, 3])
    def test_roundtrip_identity(self, N, rng):
        pr = p_basic(N=N)
        z = rng.standard_normal((100, N)) * 2.0
        w = rng.standard_normal(100) * 0.8
        rho = densities_from_entropy_vars(z, w, 0.01, pr)
        assert np.all(rho > 0.0)
        mu = chemical_potentials(rho, np.exp(w), 0.01, pr)
        assert np.max(np.abs(mu / np.exp(w)[:, None] - z)) <= 1e-10

    def test_rejects_nonfinite(self):
        with pytest.raises(DomainError):
            densities_from_entropy_vars(np.array([np.nan]), 0.0, 0.0, p_basic())
