"""Numerical checks of adiabatic-approximation criteria for finite-dimensional quantum systems."""

__version__ = "0.1.0"

from .errors import (AdiacheckError, DegenerateSpectrum, GridMismatch, InsufficientGrid,  # noqa: E402
                     LevelTrackingLost, NonHermitianSample, NonNormalizedInput, NumericalFailure,
                     PhaseUndefined, StepTooCoarse, TimeOutOfDomain, UnitarityLost)
from .hamiltonian import (AminScenario, TimeDependentHamiltonian, amin, constant,  # noqa: E402
                          landau_zener, random_smooth, sampled)
from .propagate import PropagatorOptions, evolve, evolution_operator, short_time_departure  # noqa: E402
from .spectral import decompose  # noqa: E402
from .conditions import Thresholds, evaluate_conditions  # noqa: E402
from .dual import build_dual  # noqa: E402

__all__ = [
    "AdiacheckError", "DegenerateSpectrum", "GridMismatch", "InsufficientGrid", "LevelTrackingLost",
    "NonHermitianSample", "NonNormalizedInput", "NumericalFailure", "PhaseUndefined", "StepTooCoarse",
    "TimeOutOfDomain", "UnitarityLost",
    "AminScenario", "TimeDependentHamiltonian", "amin", "constant", "landau_zener", "random_smooth", "sampled",
    "PropagatorOptions", "evolve", "evolution_operator", "short_time_departure",
    "decompose", "Thresholds", "evaluate_conditions", "build_dual",
]
