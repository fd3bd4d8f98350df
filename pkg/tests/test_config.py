"""Configuration parsing, validation, and round-trip stability."""
import numpy as np
import pytest

from thermorichards.config import (ConfigError, default_config, parse_config,
                                   serialize_config)


class TestParsing:
    def test_empty_document_gives_defaults(self):
        rc = parse_config("")
        assert rc.data == default_config()
        params = rc.params()
        params.check()
        assert params.N == 1 and params.gamma == 3.0

    def test_unknown_key_is_hard_error(self):
        with pytest.raises(ConfigError, match="unknown configuration key 'modle'"):
            parse_config("modle: {species: 1}")
        with pytest.raises(ConfigError, match="scheme.taus"):
            parse_config("scheme: {taus: 0.1}")

    def test_parse_error_carries_location(self):
        with pytest.raises(ConfigError, match="line"):
            parse_config("model: {species: 1\n  bad yaml [")

    def test_gamma_violation_names_constraint(self):
        with pytest.raises(ConfigError, match="gamma"):
            parse_config("model: {gamma: 1.5}")

    def test_alpha_r_violation(self):
        with pytest.raises(ConfigError, match="alpha_r"):
            parse_config("closures: {kr: {kind: power, alpha_r: 5.0}}")

    def test_eps_floor_guard_at_load(self):
        with pytest.raises(ConfigError, match="saturation"):
            parse_config("scheme: {eps: 0.9}")

    def test_eps_zero_is_allowed(self):
        rc = parse_config("scheme: {eps: 0.0}")
        assert rc.params().eps == 0.0

    def test_roundtrip_idempotent(self):
        text = """
model: {species: 2, mu0: [0.1, -0.1], robin_alpha: 0.2}
scheme: {tau: 0.025, eps: 0.02}
grid: {dim: 2, cells: [8, 6], extent: [1.0, 0.75]}
"""
        rc1 = parse_config(text)
        s1 = rc1.serialize()
        rc2 = parse_config(s1)
        s2 = rc2.serialize()
        assert s1 == s2
        assert rc1.data == rc2.data

    def test_mu0_broadcast(self):
        rc = parse_config("model: {species: 3, mu0: [0.5]}")
        assert rc.params().mu0 == (0.5, 0.5, 0.5)
        with pytest.raises(ConfigError):
            parse_config("model: {species: 3, mu0: [0.5, 0.1]}")


class TestBuilders:
    def test_problem_and_options(self):
        rc = parse_config("")
        problem = rc.problem()
        assert problem.grid.ncells == 200
        assert problem.phi.shape == (200,)
        opts = rc.solver_options()
        assert opts.newton_tol == 1e-10
        assert opts.homotopy_steps == (0.0, 0.25, 0.5, 0.75, 1.0)

    def test_constant_initial_state(self):
        rc = parse_config("initial: {kind: constant, rho: [0.3], T: 1.2, S: 0.5}")
        problem = rc.problem()
        st = rc.initial_state(problem)
        assert np.allclose(np.exp(st.w), 1.2)
        assert np.allclose(st.S, 0.5)

    def test_initial_saturation_truncated(self):
        rc = parse_config("initial: {kind: constant, rho: [0.3], T: 1.0, S: 0.001}")
        problem = rc.problem()
        st = rc.initial_state(problem)
        assert np.min(st.S) >= problem.params.eps

    def test_gaussian_noise_is_seed_deterministic(self):
        text = """
initial: {kind: gaussian, rho: [0.3], T: 1.0, S: 0.5, bump_rho: 0.05,
  noise: 0.01}
"""
        rc = parse_config(text)
        problem = rc.problem()
        a = rc.initial_state(problem, seed=7)
        b = rc.initial_state(problem, seed=7)
        c = rc.initial_state(problem, seed=8)
        assert np.array_equal(a.z, b.z)
        assert not np.array_equal(a.z, c.z)

    def test_zero_reactions_closure(self):
        rc = parse_config("closures: {reactions: {kind: zero}}")
        problem = rc.problem()
        r = problem.closures.reactions(np.ones(3), np.ones(3), np.ones((3, 1)))
        assert np.all(r == 0.0)

    def test_identity_b_rejected_by_validation(self):
        with pytest.raises(ConfigError, match="hp_b"):
            parse_config("closures: {b: {kind: identity}}")
