"""Exception types shared across the package."""


class FadeSchedError(Exception):
    """Base class for package errors."""


class GraphError(FadeSchedError, ValueError):
    """Structural problem with a network graph (unknown link ids, bad endpoints)."""


class ModelError(FadeSchedError, ValueError):
    """Invalid fading model or arrival process parameters."""


class CapacityError(FadeSchedError):
    """An exponential enumeration would exceed its configured cap."""


class LPError(FadeSchedError):
    """The simplex solver failed to converge."""


class VirtualBoundViolation(FadeSchedError):
    """A real queue exceeded the sum of its virtual queues."""
