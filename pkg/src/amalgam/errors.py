"""Exception and warning types.

Validation problems (bad parameters, bad config) derive from
:class:`ValidationError`; numerical failures (aliasing, divergence,
non-contraction) from :class:`NumericalError`.  The CLI maps the two
families to exit codes 2 and 3; :class:`ReportIOError` maps to 4.
"""


class AmalgamError(Exception):
    """Base class for all package errors."""


class ValidationError(AmalgamError, ValueError):
    """An input violates a documented constraint."""


class GridSizeError(ValidationError):
    """Requested lattice exceeds the configured memory cap."""


class OverlapError(ValidationError):
    """Perturbation cubes intersect (N too small)."""


class InvalidDeltaError(ValidationError):
    """Slack parameter delta violates a regime inequality."""


class StepSizeError(ValidationError):
    """Time step too large for the requested stability margin."""


class NumericalError(AmalgamError, ArithmeticError):
    """A numerical procedure could not deliver a trustworthy result."""


class AliasingError(NumericalError):
    """A product's Fourier support escapes the lattice without padding."""


class SmallnessError(NumericalError):
    """Data/time pair outside the contraction regime of the solvers."""


class NoConvergenceError(NumericalError):
    """Picard series envelope has geometric ratio >= 1."""


class NonContractionError(NumericalError):
    """Fixed-point differences grew for three consecutive iterations."""


class ConfigError(ValidationError):
    """A configuration key is missing, malformed or out of range."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class ReportIOError(AmalgamError, OSError):
    """Reading or writing an input/output file failed."""


class QuadratureWarning(UserWarning):
    """Time-quadrature error estimate exceeds the requested tolerance."""


class RegimeWarning(UserWarning):
    """A lemma precondition (e.g. T > N^-1/2) does not hold."""
