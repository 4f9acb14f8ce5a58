"""Exception taxonomy shared across the package.

Everything derives from HcflowError so callers can catch the package's failures
in one clause. ConfigError carries the offending config field path so the CLI
can name it.
"""

from __future__ import annotations


class HcflowError(Exception):
    """Base class for all package-specific failures."""


class DomainError(HcflowError):
    """Curvature / dual argument outside the open positive cone."""


class ConfigError(HcflowError):
    """Invalid configuration document."""

    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


class UnknownSpeed(ConfigError):
    """Speed-function name string could not be resolved."""

    def __init__(self, name: str, message: str = "unknown speed function"):
        ConfigError.__init__(self, "speed.name", f"{message}: {name!r}")
        self.name = name


class PoleSingularity(HcflowError):
    """Axisymmetric profile is not regular at a pole."""


class NonPositiveRadius(HcflowError):
    """Radial graph with r <= 0 somewhere."""


class NotConvex(HcflowError):
    """Body is not strictly convex where convexity is required."""


class NotHConvex(HcflowError):
    """Operation is only defined for h-convex bodies (all kappa >= 1)."""


class SingularTau(HcflowError):
    """Support-function tau matrix is numerically singular."""


class BallEscape(HcflowError):
    """Support-function body leaves the open unit (Klein) ball."""


class StepCollapse(HcflowError):
    """Time step was halved below the collapse floor."""


class DegenerateDenominator(HcflowError):
    """Global-term denominator is not positive (corrupted state)."""


class ModeMismatch(HcflowError):
    """Diagnostic applied to a run with an incompatible configuration."""


class OutOfRange(HcflowError):
    """Inverse lookup outside the range of a monotone function."""


class InsufficientWindow(HcflowError):
    """Too few qualifying samples for a regression window."""


class BisectionFail(HcflowError):
    """No bracketing interval found for a bisection search."""


class SnapshotFormatError(HcflowError):
    """Malformed state snapshot file."""
