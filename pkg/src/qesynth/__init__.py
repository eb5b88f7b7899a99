"""Exact-arithmetic toolkit for synthesizing safe optimal switching controllers.

The pipeline reduces a min-max-min optimal control problem over a
switched system to linear quantifier elimination plus parametric
quadratic programming, discretizes the outer design parameters on an
exact rational grid, and returns bit-exact optimal values together with
piecewise-affine controllers.
"""

from .rationals import Rat, Surd, rat, format_rat
from .formula import (
    AffineExpr,
    Atom,
    Formula,
    Polyhedron,
    QuadExpr,
    Rel,
    VarId,
    canonicalize,
    evaluate,
    substitute,
    to_dnf,
    var,
    const,
)

__version__ = "0.1.0"
