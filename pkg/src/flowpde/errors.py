"""Fault types.

Validation faults are misuse of the public interface (bad specs, mismatched
grids, out-of-regime parameters).  Numerical faults are runtime detections
(NaN/Inf, overflow before a clean blow-up stop).
"""


class FlowPDEError(Exception):
    pass


class ValidationFault(FlowPDEError):
    """Raised on precondition / invariant violations."""


class NumericalFault(FlowPDEError):
    """Raised when a computation produced non-finite or unusable values."""
