"""Exception types raised by the flow, geometry and monitor layers."""


class HarnackFlowError(Exception):
    """Base class for all package errors."""


class OutsideConeError(ValueError, HarnackFlowError):
    """A curvature vector has a non-positive entry (outside the positive cone)."""


class ConvexityLost(HarnackFlowError):
    """A profile stopped being strictly convex.

    Carries the offending node index, the time and the node array so a
    caller can dump the state.
    """

    def __init__(self, message, node=None, t=None, nodes=None):
        super().__init__(message)
        self.node = node
        self.t = t
        self.nodes = nodes


class ResolutionError(HarnackFlowError):
    """The discretization cannot resolve the curve (coincident nodes, etc.)."""


class StepRejected(HarnackFlowError):
    """Time step still too large after the maximum number of halvings."""


class WindowViolation(HarnackFlowError):
    """A Lagrangian triple straddles a regrid."""


class FloorViolation(HarnackFlowError):
    """The smallest principal curvature dropped below the guaranteed floor."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConfigError(HarnackFlowError):
    """Invalid scenario configuration."""
