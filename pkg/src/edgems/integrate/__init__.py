"""Time integration: phi_1, exponential Euler and the backward Euler reference."""
from .exponential import (ConfigurationError, IntegrationError, LinearPart, Propagator, SpeciesSystem,
                          StepperState, Trajectory, build_propagator, exp_euler_step, run_exponential)
from .phi import Phi1Action, phi1_dense, phi1_scalar
from .reaction import (AllenCahn, CustomPolynomial, ReactionModel, Schnakenberg, SchnakenbergHetero,
                       make_reaction)
from .reference import ReferenceResult, backward_euler_reference

__all__ = [
    "AllenCahn", "ConfigurationError", "CustomPolynomial", "IntegrationError", "LinearPart", "Phi1Action",
    "Propagator", "ReactionModel", "ReferenceResult", "Schnakenberg", "SchnakenbergHetero", "SpeciesSystem",
    "StepperState", "Trajectory", "backward_euler_reference", "build_propagator", "exp_euler_step",
    "make_reaction", "phi1_dense", "phi1_scalar", "run_exponential",
]
