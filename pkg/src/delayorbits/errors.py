"""Exception and warning types shared across the package."""

from __future__ import annotations


class DelayOrbitError(Exception):
    """Base class for all errors raised by this package."""


class FormulaSyntaxError(DelayOrbitError):
    """Malformed formula text; ``position`` is the 0-based byte offset of the first bad token."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class UnknownIdentifierError(FormulaSyntaxError):
    """Identifier that is neither the declared variable, ``pi``, nor a known function."""

    def __init__(self, name: str, position: int):
        super().__init__(f"unknown identifier {name!r}", position)
        self.name = name


class DomainError(DelayOrbitError):
    """Evaluation outside an inner function's domain (sqrt of a negative, |arcsin arg| > 1, ...)."""

    def __init__(self, message: str, x: float):
        super().__init__(f"{message} (x = {x!r})")
        self.x = x


class InvalidGError(DelayOrbitError):
    """The radial function violates the standing assumption g(0) = 0."""


class SeedNotOnLevelError(DelayOrbitError):
    """Branch seed does not satisfy the defining equation at the start delay."""


class StepRejectedError(DelayOrbitError):
    """Continuation step failed after the maximum number of halvings."""

    def __init__(self, tau: float, message: str = "continuation step rejected"):
        super().__init__(f"{message} at tau = {tau!r}")
        self.tau = tau


class OutOfRangeError(DelayOrbitError):
    """Requested delay value lies outside the traced range."""


class EmptyOverlapError(DelayOrbitError):
    """Angular and radial branches have disjoint delay ranges."""


class EmptyFamilyError(DelayOrbitError):
    """Operation requires a family with at least one sample."""


class DegenerateContactError(DelayOrbitError):
    """Extremum contact with vanishing second derivative; outside the supported taxonomy."""


class NonContinuableContactError(DelayOrbitError):
    """Contact at which no same-direction continuation exists (fold in the delay parameter)."""


class NotACuspError(DelayOrbitError):
    """Reversal certification requested at a point where the curve speed is not small."""


class UnclassifiedSingularityError(DelayOrbitError):
    """Detected near-singular point matching neither the zero-radius nor the slope condition."""


class PropertyViolationError(DelayOrbitError):
    """A numerically checked structural property failed; carries full diagnostics."""


class NotAnOrbitError(DelayOrbitError):
    """Monodromy requested at a point that is not a 1-periodic orbit of the field."""


class StepTooLargeError(DelayOrbitError):
    """Integrator step exceeds the delay-interval bound h <= tau/8."""


class HistoryGapError(DelayOrbitError):
    """Delayed lookup fell outside the stored history."""


class ConfigError(DelayOrbitError):
    """Invalid run configuration or config file."""


class GridTooCoarseWarning(UserWarning):
    """Two roots shared one scan bracket; results were deduplicated."""


class PeriodicityWarning(UserWarning):
    """Declared-periodic formula is not periodic on the sample grid; argument folding is applied."""
