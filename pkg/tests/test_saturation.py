"""The implicit capillary saturation update and its floor property."""
import numpy as np
import pytest

from thermorichards.closures import default_closures
from thermorichards.params import ModelParams
from thermorichards.state import _solve_saturation

from oracles import bisect


@pytest.fixture
def setup():
    pr = ModelParams(tau=0.1, eps=0.0)
    return pr, default_closures(pr)


class TestSaturationRoot:
    def test_stationary_point(self, setup):
        # if P_ce(S_prev) + p = 0 the root is exactly S_prev
        pr, cl = setup
        S_prev = np.array([0.5])
        p = -np.asarray(cl.pc_eps(S_prev, pr.eps, pr.k_p))
        S = _solve_saturation(p, S_prev, pr.tau, 1.0, pr.eps, pr, cl)
        assert S[0] == pytest.approx(0.5, abs=1e-13)

    def test_against_bisection_oracle(self, setup):
        # defaults: f = 4 + log(1-s), P_c = s^-2, tau = 0.1, p = 0, S_prev = 0.5
        pr, cl = setup
        S = _solve_saturation(np.array([0.0]), np.array([0.5]), 0.1, 1.0,
                              0.0, pr, cl)

        def g(s):
            return (np.log1p(-s) - np.log(0.5)) / 0.1 + s ** -2

        ref = bisect(g, 1e-6, 1.0 - 1e-9, tol=1e-14)
        assert S[0] == pytest.approx(ref, abs=1e-12)

    def test_monotone_increasing_in_p(self, setup):
        # implicit differentiation of the update gives dS/dp > 0 (high water
        # pressure pushes saturation up, bounded by p >= -p_at from below)
        pr, cl = setup
        S_prev = np.full(41, 0.5)
        p = np.linspace(-2.0, 30.0, 41)
        S = _solve_saturation(p, S_prev, 0.1, 1.0, 0.0, pr, cl)
        assert np.all(np.diff(S) > 0.0)
        assert np.all((S > 0.0) & (S < 1.0))

    def test_sigma_zero_returns_previous(self, setup):
        pr, cl = setup
        S_prev = np.array([0.37, 0.62])
        S = _solve_saturation(np.array([5.0, -1.0]), S_prev, 0.1, 0.0,
                              0.0, pr, cl)
        assert np.array_equal(S, S_prev)

    @pytest.mark.parametrize("sigma", [1.0, 0.5, 0.25])
    def test_floor_under_admissible_eps(self, sigma):
        # S^k >= eps whenever eps < f^-1(p_at/lambda0) and p >= -p_at,
        # along the whole homotopy path
        pr = ModelParams(tau=0.05, eps=0.01)
        cl = default_closures(pr)
        bound = cl.sat_floor_bound(pr.p_at)
        assert pr.eps < bound
        rng = np.random.default_rng(5)
        S = np.full(200, pr.eps)  # start exactly at the floor
        for _ in range(30):
            p = rng.uniform(-pr.p_at, 5.0, size=200)  # p >= -p_at structurally
            S = _solve_saturation(p, S, pr.tau, sigma, pr.eps, pr, cl)
            assert np.min(S) >= pr.eps - 1e-12

    def test_generic_closure_path_matches_kernel(self, setup):
        # force the generic brentq path by hiding the closure family tags
        pr, cl = setup
        rng = np.random.default_rng(11)
        p = rng.uniform(-1.0, 4.0, size=16)
        S_prev = rng.uniform(0.2, 0.8, size=16)
        fast = _solve_saturation(p, S_prev, 0.1, 1.0, 0.0, pr, cl)

        class Hidden:
            kind = "custom"

            def __init__(self, inner):
                self._inner = inner

            def __getattr__(self, name):
                return getattr(self._inner, name)

            def __call__(self, s):
                return self._inner(s)

        import copy
        cl2 = copy.copy(cl)
        cl2.f = Hidden(cl.f)
        slow = _solve_saturation(p, S_prev, 0.1, 1.0, 0.0, pr, cl2)
        assert np.max(np.abs(fast - slow)) <= 1e-11
