"""Exception hierarchy.

Input problems subclass ``ValueError``; failures that arise while integrating
or diagonalizing subclass :class:`NumericalFailure` so the CLI can map them to
a distinct exit code.
"""


class AdiacheckError(Exception):
    """Base class for all errors raised by this package."""


class TimeOutOfDomain(AdiacheckError, ValueError):
    pass


class NonHermitianSample(AdiacheckError, ValueError):
    pass


class NonNormalizedInput(AdiacheckError, ValueError):
    pass


class InsufficientGrid(AdiacheckError, ValueError):
    pass


class GridMismatch(AdiacheckError, ValueError):
    pass


class NumericalFailure(AdiacheckError):
    """A computation could not be completed to the required accuracy."""


class DegenerateSpectrum(NumericalFailure):
    """Two instantaneous levels came closer than the gap floor."""


class LevelTrackingLost(NumericalFailure):
    """Eigenvalue ordering or eigenvector identity is ambiguous between frames."""


class StepTooCoarse(NumericalFailure):
    """Step-halving refinement disagreed with the original run."""


class UnitarityLost(NumericalFailure):
    pass


class PhaseUndefined(NumericalFailure):
    """The coupling is too small on most of the grid to define a phase rate."""
