import numpy as np
import pytest

from thermorichards.config import parse_config
from thermorichards.params import ModelParams


@pytest.fixture
def params1():
    return ModelParams()


@pytest.fixture
def params2():
    return ModelParams(N=2, mu0=(0.0, 0.0))


@pytest.fixture
def params3():
    return ModelParams(N=3, mu0=(0.0, 0.0, 0.0))


def build(cfg_text: str):
    """Parse a config snippet and return (RunConfig, Problem, initial state)."""
    rc = parse_config(cfg_text)
    problem = rc.problem()
    state0 = rc.initial_state(problem)
    return rc, problem, state0


# reference equilibrium of the default closure set (z = 0, w = 0 fixed point):
# rho* solves log(rho) + (gamma rho^{gamma-1} + eps K1 rho^{K1-1})/T = -1 at
# T = 1, and S* balances the regularized capillary pressure against p(rho*).
RHO_STAR = 0.2871586834664410
S_STAR = 0.6795641163845231


def equilibrium_config(cells=50, tau=0.01, eps=0.01, delta=0.0, extra=""):
    return f"""
grid: {{dim: 1, cells: [{cells}], extent: [1.0]}}
scheme: {{tau: {tau}, eps: {eps}, delta: {delta}}}
initial: {{kind: constant, rho: [{RHO_STAR}], T: 1.0, S: {S_STAR}}}
{extra}
"""


def perturbed_config(cells=100, tau=0.01, eps=0.01, delta=0.0,
                     amp=0.05, extra=""):
    return f"""
grid: {{dim: 1, cells: [{cells}], extent: [1.0]}}
scheme: {{tau: {tau}, eps: {eps}, delta: {delta}}}
initial: {{kind: gaussian, rho: [{RHO_STAR}], T: 1.0, S: {S_STAR},
  bump_rho: {amp}, bump_T: {amp * 1.6}, bump_S: {amp}, bump_width: 0.12}}
{extra}
"""


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
