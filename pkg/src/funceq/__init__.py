"""Symbolic workbench for functional equations.

Parse problems, derive facts with shift-style moves and named lemmas,
verify candidate closed forms by exact coefficient matching, and
cross-check integer problems against a finite brute-force search.
"""

from .core import (DomainKind, Fact, FApp, Param, Poly, PropertyFact, PropertyKind,
                   ShiftFact, SideCondition, Var, equal, normalize, substitute)
from .family import CandidateFamily, Shape
from .parse import ParseError, ProblemSpec, parse_expr, parse_family, parse_problem, render

__all__ = [
    "CandidateFamily", "DomainKind", "FApp", "Fact", "Param", "ParseError", "Poly",
    "ProblemSpec", "PropertyFact", "PropertyKind", "Shape", "ShiftFact", "SideCondition",
    "Var", "equal", "normalize", "parse_expr", "parse_family", "parse_problem", "render",
    "substitute",
]
