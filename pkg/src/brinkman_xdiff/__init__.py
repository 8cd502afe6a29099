"""Finite-volume simulator for a Brinkman-regularized cross-diffusion population model."""

from .core import Grid1D, ModelParams, State, SteadyState, make_grid, steady_state, validate_params
from .dynamics import Problem, StepConfig, Trajectory, simulate, stable_dt, step, velocity
from .elliptic import BrinkmanOperator, GreenKernel, apply_K, apply_L, assemble, green_solve
from .entropy import Diagnostician, h1, h1_relative, h2, h2_relative
from .errors import BrinkmanError, ConfigurationError, HypothesisViolated, SimulationError

__version__ = "0.1.0"

__all__ = [
    "BrinkmanError",
    "BrinkmanOperator",
    "ConfigurationError",
    "Diagnostician",
    "GreenKernel",
    "Grid1D",
    "HypothesisViolated",
    "ModelParams",
    "Problem",
    "SimulationError",
    "State",
    "SteadyState",
    "StepConfig",
    "Trajectory",
    "apply_K",
    "apply_L",
    "assemble",
    "green_solve",
    "h1",
    "h1_relative",
    "h2",
    "h2_relative",
    "make_grid",
    "simulate",
    "stable_dt",
    "steady_state",
    "step",
    "validate_params",
    "velocity",
]
