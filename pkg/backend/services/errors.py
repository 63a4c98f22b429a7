"""
Error Types
===========
Exception hierarchy shared by every service module.

All errors derive from ValueError so call sites that only guard against
bad input values (the convention of the data-loading modules) keep working.
"""


class ClusterLabError(ValueError):
    """Base class for all domain errors."""


class NegativeMass(ClusterLabError):
    """A probability entry is negative."""


class NotNormalized(ClusterLabError):
    """Total probability deviates from 1 by more than the normalization bound."""


class BadOffset(ClusterLabError):
    """A pmf has the wrong smallest support point for the requested operation."""


class NotMonotone(ClusterLabError):
    """A side-count pmf is not nonincreasing, so the derived law would be negative."""


class BadArgument(ClusterLabError):
    """An argument is outside its admissible range."""


class ThetaZero(ClusterLabError):
    """
    The extremal index is zero, so the typical cluster law is undefined.

    When raised from a moments computation the partial report
    (theta = 0, inspected size infinite almost surely) is attached.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class BadTheta(ClusterLabError):
    """theta is outside (0, 1]."""


class MassOverflow(ClusterLabError):
    """theta * E(S^t) exceeds 1, so no side law can carry the given typical law."""


class OutOfWindow(ClusterLabError):
    """An index set or interval leaves the window of the law being checked."""


class ShiftNotInSet(ClusterLabError):
    """The shift a is not an element of the index set."""


class WindowTooLarge(ClusterLabError):
    """The window is too wide for exhaustive pattern enumeration."""


class Degenerate(ClusterLabError):
    """A two-state chain has an absorbing state."""


class NoExceedances(ClusterLabError):
    """No conditioning instant (I_t = 1) was observed."""


class NoAnchors(ClusterLabError):
    """No conditioning instant starts (or ends) a cluster."""


class ConfigError(ClusterLabError):
    """A run configuration is invalid or references missing files."""
