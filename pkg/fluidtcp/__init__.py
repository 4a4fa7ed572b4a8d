"""Stability lab for delayed TCP fluid models: equilibria, delay margins, simulation, queue statistics."""

from .equilibrium import Variant, solve_equilibrium
from .errors import ConfigurationError, DomainError, FluidModelError, NumericError, ScenarioError
from .linearize import ScalarCoefficients, scalar_coefficients
from .loss_models import DropTailSmallBuffer, GaussianMixedTraffic
from .protocols import COMPOUND_DEFAULTS, ProtocolKind, ProtocolSpec

__all__ = [
    "COMPOUND_DEFAULTS",
    "ConfigurationError",
    "DomainError",
    "DropTailSmallBuffer",
    "FluidModelError",
    "GaussianMixedTraffic",
    "NumericError",
    "ProtocolKind",
    "ProtocolSpec",
    "ScalarCoefficients",
    "ScenarioError",
    "Variant",
    "scalar_coefficients",
    "solve_equilibrium",
]
