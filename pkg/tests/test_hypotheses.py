"""The hypothesis validator on the default closures and documented mutations."""
import numpy as np
import pytest

from thermorichards.closures import ConstantPorosity, PowerKr, PowerPc, default_closures
from thermorichards.hypotheses import validate_hypotheses
from thermorichards.params import ModelParams


@pytest.fixture
def defaults():
    params = ModelParams()
    return params, default_closures(params)


def test_default_set_passes_everything(defaults):
    params, closures = defaults
    report = validate_hypotheses(params, closures)
    assert report.passed, str(report)


def test_report_carries_estimated_constants(defaults):
    params, closures = defaults
    report = validate_hypotheses(params, closures)
    by_name = {c.name: c for c in report.checks}
    # the validator reports computed infima (c_f, lambda0, ...) in the detail
    assert "c_f" in by_name["hp_Pcf"].detail
    assert "lambda0" in by_name["hp_Pcf2"].detail
    assert by_name["sat_floor_guard"].passed


def test_gamma_mutation_fails_named_check(defaults):
    _, closures = defaults
    params = ModelParams(gamma=1.5, q=1.8, beta=6.0)  # keep q, beta formally legal
    report = validate_hypotheses(params, closures)
    assert "gamma" in report.failed_names()


def test_alpha_r_mutation_fails_hp_kr(defaults):
    params, closures = defaults
    bad = params.with_(alpha_r=5.0)
    closures.kr = PowerKr(5.0)
    report = validate_hypotheses(bad, closures)
    assert "hp_kr" in report.failed_names()


def test_identity_b_fails_hp_b(defaults):
    params, closures = defaults
    closures.b = np.eye(params.N)
    report = validate_hypotheses(params, closures)
    assert "hp_b" in report.failed_names()


def test_full_porosity_fails_phi_pos(defaults):
    params, closures = defaults
    closures.phi = ConstantPorosity(1.0)
    report = validate_hypotheses(params, closures)
    assert "phi_pos" in report.failed_names()


def test_weak_capillary_blowup_fails_hp_Pcf(defaults):
    # k_p = 1 makes |Pc'| k_r^{q/(2(q-1))}/|f'| ~ s^{2-k_p} -> 0: infimum 0
    params, closures = defaults
    bad = params.with_(k_p=1.0)
    closures.pc = PowerPc(1.0, 1.0)
    report = validate_hypotheses(bad, closures)
    assert "hp_Pcf" in report.failed_names()


def test_eps_guard(defaults):
    params, closures = defaults
    bound = closures.sat_floor_bound(params.p_at)
    assert 0.8 < bound < 0.9  # f^-1(p_at/lambda0) for the default set
    report = validate_hypotheses(params.with_(eps=bound + 0.01), closures)
    assert "sat_floor_guard" in report.failed_names()


def test_onsager_bounds_reported(defaults):
    params3 = ModelParams(N=3, mu0=(0.0, 0.0, 0.0))
    closures = default_closures(params3)
    report = validate_hypotheses(params3, closures)
    by_name = {c.name: c for c in report.checks}
    assert by_name["Ass_L"].passed
    assert "C =" in by_name["Ass_L"].detail
