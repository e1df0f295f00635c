"""Exception types shared across the library.

Every failure mode that a caller is expected to handle gets its own class;
all of them derive from FineDomainError so harness code can catch broadly.
"""


class FineDomainError(Exception):
    """Base class for all library errors."""


class EmptyMask(FineDomainError):
    """An operation that needs a nonempty grid mask received an empty one."""


class FrameTooTight(FineDomainError):
    """The labeling frame does not leave a 2-cell margin around the mask."""


class NoCircleFound(FineDomainError):
    """No certified circle exists in the requested radius window."""


class WedgeNotFound(FineDomainError):
    """Apex search exhausted its budget without certifying a wedge.

    A resolution failure, not a counterexample to anything.
    """


class DegenerateSet(FineDomainError):
    """Equilibrium measure requested for a single-cell mask.

    The attribute ``cell_scale_capacity`` carries the cell-size capacity
    estimate so callers can still report something sensible.
    """

    def __init__(self, msg, cell_scale_capacity=0.0):
        super().__init__(msg)
        self.cell_scale_capacity = cell_scale_capacity


class NoMargin(FineDomainError):
    """The compact touches the complement data at this resolution."""

    def __init__(self, msg, stage=None):
        super().__init__(msg)
        self.stage = stage


class SeparationFailure(FineDomainError):
    """d(K_n, F_n) or the stage margin is too small for the resolution."""


class GeometryDegenerate(FineDomainError):
    """Arc-cut point too close to an arc endpoint (or similar degeneracy)."""


class FitFailed(FineDomainError):
    """Two-level rational fit hit its escalation cap.

    ``achieved`` holds the best (max_on_K, min_on_L) reached before giving up.
    """

    def __init__(self, msg, achieved=None):
        super().__init__(msg)
        self.achieved = achieved


class PoleProximity(FineDomainError):
    """Evaluation point within 1e-9 of a pole."""


class ScanFailed(FineDomainError):
    """No good circles found at any of the 12 ladder levels."""


class InsufficientStages(FineDomainError):
    """The blow-up bound M needs a deeper stage than the run provides."""

    def __init__(self, msg, required_stage=None):
        super().__init__(msg)
        self.required_stage = required_stage


class ConfigError(FineDomainError):
    """Malformed scenario configuration."""
