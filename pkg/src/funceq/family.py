"""Parametric closed forms submitted for verification.

A family is stored as a ratio ``numerator(x) / denominator(x)`` of canonical
polynomials in the family variable ``x`` and its parameters.  Only the
shapes below are accepted; the denominator is either 1 or ``x``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .core import ONE, ZERO, Poly, Var, lift, substitute, substitute_params

FAMILY_VAR = "x"
MAX_DEGREE = 3


class UnsupportedFamily(ValueError):
    pass


class Shape(enum.Enum):
    CONSTANT = "Constant"
    LINEAR = "Linear"
    AFFINE = "Affine"
    RECIPROCAL_AFFINE = "ReciprocalAffine"
    POLYNOMIAL = "PolynomialDeg"


class RatFunc:
    """Quotient of two polynomials; no gcd cancellation is attempted."""

    __slots__ = ("num", "den")

    def __init__(self, num: Poly, den: Poly = ONE):
        if den.is_zero():
            raise ZeroDivisionError("zero denominator")
        self.num = num
        self.den = den

    @staticmethod
    def of(x) -> "RatFunc":
        return x if isinstance(x, RatFunc) else RatFunc(lift(x))

    def __add__(self, other):
        o = RatFunc.of(other)
        if self.den == o.den:
            return RatFunc(self.num + o.num, self.den)
        return RatFunc(self.num * o.den + o.num * self.den, self.den * o.den)

    def __neg__(self):
        return RatFunc(-self.num, self.den)

    def __sub__(self, other):
        return self + (-RatFunc.of(other))

    def __mul__(self, other):
        o = RatFunc.of(other)
        return RatFunc(self.num * o.num, self.den * o.den)

    def __truediv__(self, other):
        o = RatFunc.of(other)
        if o.num.is_zero():
            raise ZeroDivisionError("division by the zero polynomial")
        return RatFunc(self.num * o.den, self.den * o.num)

    def __pow__(self, n: int):
        return RatFunc(self.num ** n, self.den ** n)

    def is_polynomial(self) -> bool:
        return self.den == ONE


@dataclass(frozen=True)
class CandidateFamily:
    numerator: Poly
    denominator: Poly = ONE
    parameters: tuple = ()
    validity: Poly | None = None       # None: whole domain; else "x > validity"
    sign_constraints: tuple = ()       # ((param, "nonnegative"), ...)
    note: str = ""
    shape: Shape = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "shape", classify(self.numerator, self.denominator))
        names = set(self.numerator.parameters()) | set(self.denominator.parameters())
        if not self.parameters and names:
            object.__setattr__(self, "parameters", tuple(sorted(names)))

    @classmethod
    def polynomial(cls, poly, **kw) -> "CandidateFamily":
        return cls(lift(poly), ONE, **kw)

    @property
    def is_concrete(self) -> bool:
        return not (self.numerator.parameters() | self.denominator.parameters())

    def free_parameters(self) -> set[str]:
        return self.numerator.parameters() | self.denominator.parameters()

    def assign(self, values: Mapping[str, object]) -> "CandidateFamily":
        num = substitute_params(self.numerator, values)
        den = substitute_params(self.denominator, values)
        left = tuple(p for p in self.parameters if p not in values)
        return CandidateFamily(num, den, left, self.validity,
                               tuple(s for s in self.sign_constraints if s[0] not in values),
                               self.note)

    def compose(self, arg: RatFunc) -> RatFunc:
        """Value of the family at ``arg`` as a single quotient."""
        n, d = arg.num, arg.den
        x = Var(FAMILY_VAR)
        ncoef = self.numerator.collect(x)
        dcoef = self.denominator.collect(x)
        deg = max([0, *ncoef, *dcoef])
        # homogenize both to a common degree so the D-powers cancel
        def hom(coefs):
            acc = ZERO
            for k, c in coefs.items():
                acc = acc + c * (n ** k) * (d ** (deg - k))
            return acc
        top, bottom = hom(ncoef), hom(dcoef)
        if bottom.is_zero():
            raise UnsupportedFamily("family denominator vanishes identically at a nested argument")
        return RatFunc(top, bottom)

    def at_poly(self, arg: Poly) -> Poly:
        if self.denominator != ONE:
            raise UnsupportedFamily("not a polynomial family")
        return substitute(self.numerator, {FAMILY_VAR: arg})

    def value(self, q: Fraction, params: Mapping[str, Fraction] | None = None) -> Fraction:
        from .core import evaluate
        env = {FAMILY_VAR: Fraction(q)}
        num = evaluate(self.numerator, env, _no_f, params)
        den = evaluate(self.denominator, env, _no_f, params)
        if den == 0:
            raise ZeroDivisionError(f"family undefined at x = {q}")
        return num / den

    def render(self) -> str:
        from .parse import render
        if self.denominator == ONE:
            return render(self.numerator)
        x = Var(FAMILY_VAR)
        co = self.numerator.collect(x)
        a, b = co.get(0, ZERO), co.get(1, ZERO)
        a_s = render(a)
        if len(a.terms) > 1:
            a_s = f"({a_s})"
        s = f"{a_s}/x"
        if not b.is_zero():
            bs = render(b)
            s += f" - {bs[1:]}" if bs.startswith("-") and len(b.terms) == 1 else f" + {bs}"
        return s

    def __str__(self):
        return f"f(x) = {self.render()}"


def _no_f(_):
    raise ValueError("families never contain f")


def classify(num: Poly, den: Poly) -> Shape:
    x = Var(FAMILY_VAR)
    for part in (num, den):
        if part.has_f():
            raise UnsupportedFamily("closed forms cannot mention f")
        bad = part.variables() - {FAMILY_VAR}
        if bad:
            raise UnsupportedFamily(f"closed form mentions variables {sorted(bad)}")
    if den == ONE:
        co = num.collect(x)
        deg = max(co) if co else 0
        if deg == 0:
            return Shape.CONSTANT
        if deg == 1:
            return Shape.LINEAR if 0 not in co else Shape.AFFINE
        if deg <= MAX_DEGREE:
            return Shape.POLYNOMIAL
        raise UnsupportedFamily(f"polynomial families are capped at degree {MAX_DEGREE}")
    if den == Poly.var(FAMILY_VAR):
        if num.degree_in(x) <= 1:
            return Shape.RECIPROCAL_AFFINE
    raise UnsupportedFamily("only polynomial and a/x + b families are supported")


def affine(a: str = "a", b: str = "b", **kw) -> CandidateFamily:
    return CandidateFamily.polynomial(Poly.param(a) * Poly.var(FAMILY_VAR) + Poly.param(b),
                                      parameters=(a, b), **kw)


def linear(a: str = "c", **kw) -> CandidateFamily:
    return CandidateFamily.polynomial(Poly.param(a) * Poly.var(FAMILY_VAR), parameters=(a,), **kw)


def constant(b: str = "b", **kw) -> CandidateFamily:
    return CandidateFamily.polynomial(Poly.param(b), parameters=(b,), **kw)


def reciprocal_affine(a: str = "a", b: str = "b", **kw) -> CandidateFamily:
    x = Poly.var(FAMILY_VAR)
    return CandidateFamily(Poly.param(a) + Poly.param(b) * x, x, (a, b), **kw)
