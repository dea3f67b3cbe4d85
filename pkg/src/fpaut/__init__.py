"""Exact computation with automorphisms of free products.

Core objects: reduced words over a free product decomposition, the boundary
of infinite reduced words, automorphisms preserving the factor system,
marked graphs of groups with self maps (train track verification), the
depth-bounded laminary language, and attractive fixed rays with their
brick splittings.
"""

from .errors import (FpError, JunctionCancellationError, ParseError,
                     PreconditionError, SearchExhausted, StagnationError,
                     ValidationError)
from .factors import (CyclicFactor, FactorAutomorphism, FactorElement,
                      FactorGroup, FreeFactor, TableFactor, apply_factor_aut,
                      elem_mul, verify_factor_aut)
from .words import (EMPTY_WORD, BoundaryDistance, FreeLetter, FreeProduct,
                    Ray, Word)
from .autos import (FactorAction, FixVerdict, FpAutomorphism,
                    classify_fixed_point, fixes_boundary_point,
                    identity_automorphism, inner)

__all__ = [
    "FpError", "ParseError", "ValidationError", "PreconditionError",
    "StagnationError", "JunctionCancellationError", "SearchExhausted",
    "CyclicFactor", "TableFactor", "FreeFactor", "FactorGroup",
    "FactorElement", "FactorAutomorphism", "elem_mul", "apply_factor_aut",
    "verify_factor_aut",
    "FreeProduct", "Word", "FreeLetter", "Ray", "EMPTY_WORD",
    "BoundaryDistance",
    "FpAutomorphism", "FactorAction", "FixVerdict", "identity_automorphism",
    "inner", "fixes_boundary_point", "classify_fixed_point",
]

__version__ = "0.1.0"
