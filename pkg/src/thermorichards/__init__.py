"""Entropy-stable implicit solver for nonisothermal multispecies Richards flow.

The solver advances the coupled mass/energy/saturation system by implicit
Euler in entropy variables (chemical potentials over temperature, log
temperature), with lower- and higher-order regularizations, and verifies the
discrete thermodynamic structure (entropy production sign, energy and mass
budgets, saturation floor, entropy-energy Lyapunov monotonicity) at every
accepted step.
"""

__version__ = "0.1.0"

from .closures import ClosureSet, default_closures, projector
from .constitutive import (chemical_potentials, densities_from_entropy_vars,
                           free_energy_water, internal_energy,
                           interfacial_and_fluid_energy, mobility,
                           onsager_fluxes, pressure, reaction_terms,
                           skeleton_entropy_energy, thermo_point, water_entropy)
from .grid import Grid, make_grid
from .hypotheses import validate_hypotheses
from .params import ModelParams
from .solver import (SolverOptions, StepFailure, InvariantViolation, Stepper,
                     run_simulation, time_step)
from .state import EntropyState, Problem, state_from_primitives

__all__ = [
    "ClosureSet", "default_closures", "projector",
    "chemical_potentials", "densities_from_entropy_vars", "free_energy_water",
    "internal_energy", "interfacial_and_fluid_energy", "mobility",
    "onsager_fluxes", "pressure", "reaction_terms", "skeleton_entropy_energy",
    "thermo_point", "water_entropy",
    "Grid", "make_grid", "validate_hypotheses", "ModelParams",
    "SolverOptions", "StepFailure", "InvariantViolation", "Stepper",
    "run_simulation", "time_step",
    "EntropyState", "Problem", "state_from_primitives",
    "__version__",
]
