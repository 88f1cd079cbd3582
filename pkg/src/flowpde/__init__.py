"""flowpde: a numerical laboratory for semilinear parabolic SPDEs on the
torus, built around scale-decomposed heat kernels, an effective-force
renormalization flow, and coupled universality experiments."""

__version__ = "0.1.0"

from .errors import FlowPDEError, NumericalFault, ValidationFault
from .lattice import Field, LatticeSpec, read_fld1, write_fld1

__all__ = [
    "FlowPDEError",
    "NumericalFault",
    "ValidationFault",
    "Field",
    "LatticeSpec",
    "read_fld1",
    "write_fld1",
    "__version__",
]
