"""Expressions, canonical polynomials over atoms, and the fact data model.

Two representations live here.  ``Expression`` trees are what the parser
builds and what users write by hand; ``Poly`` is the canonical form every
other module computes with.  A ``Poly`` is a map from monomials to nonzero
rationals, where a monomial is a product of atom powers and an atom is a
variable, a parameter, or an application ``f(arg)`` whose argument is itself
a ``Poly``.  Two expressions are equal exactly when their ``Poly`` forms are.
"""

from __future__ import annotations

import math
import enum
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Union


# ---------------------------------------------------------------------------
# Atoms
# ---------------------------------------------------------------------------

class Atom:
    __slots__ = ("_key", "_hash")
    tag = -1

    @property
    def key(self) -> tuple:
        return self._key

    def __hash__(self):
        return self._hash

    def __lt__(self, other: "Atom") -> bool:
        return self._key < other._key


class Var(Atom):
    __slots__ = ("name",)
    tag = 0

    def __init__(self, name: str):
        self.name = name
        self._key = (0, name)
        self._hash = hash(self._key)

    def __eq__(self, other):
        return type(other) is Var and other.name == self.name

    __hash__ = Atom.__hash__

    def __repr__(self):
        return f"Var({self.name!r})"


class Param(Atom):
    __slots__ = ("name",)
    tag = 1

    def __init__(self, name: str):
        self.name = name
        self._key = (1, name)
        self._hash = hash(self._key)

    def __eq__(self, other):
        return type(other) is Param and other.name == self.name

    __hash__ = Atom.__hash__

    def __repr__(self):
        return f"Param({self.name!r})"


class FApp(Atom):
    __slots__ = ("arg",)
    tag = 2

    def __init__(self, arg: "Poly"):
        self.arg = arg
        self._key = (2, arg.key)
        self._hash = hash(self._key)

    def __eq__(self, other):
        return type(other) is FApp and other._key == self._key

    __hash__ = Atom.__hash__

    def __repr__(self):
        return f"FApp({self.arg!r})"


def compare_atoms(a: Atom, b: Atom) -> int:
    """Structural total order: Var < Param < FApp, then name, then argument."""
    return (a.key > b.key) - (a.key < b.key)


Mono = tuple  # tuple[(Atom, int), ...] sorted by atom key


def _mono_mul(m1: Mono, m2: Mono) -> Mono:
    if not m1:
        return m2
    if not m2:
        return m1
    acc: dict[Atom, int] = dict(m1)
    for a, p in m2:
        acc[a] = acc.get(a, 0) + p
    return tuple(sorted(acc.items(), key=lambda ap: ap[0].key))


def _mono_degree(m: Mono) -> int:
    return sum(p for _, p in m)


def _term_order(m: Mono) -> tuple:
    # unknown-part degree first (variables and f-atoms), then total degree,
    # then structure; gives "2*c*x + c^2" for parameter c and variable x
    free_deg = sum(p for a, p in m if a.tag != 1)
    return (-free_deg, -_mono_degree(m), tuple((a.key, -p) for a, p in m))


# ---------------------------------------------------------------------------
# Canonical polynomials
# ---------------------------------------------------------------------------

Number = Union[int, Fraction]


MAX_EXPANSION_TERMS = 1000


class ExpansionLimit(ValueError):
    """Raised instead of expanding a power with an impractical number of terms."""


class Poly:
    """Canonical polynomial over atoms with exact rational coefficients.

    Immutable; hashable; ``==`` is structural equality of the canonical map.
    """

    __slots__ = ("terms", "_map", "_hash", "_key")

    def __init__(self, mapping: Mapping[Mono, Number] | None = None):
        items = []
        if mapping:
            for m, c in mapping.items():
                if c:
                    items.append((m, Fraction(c)))
        items.sort(key=lambda mc: _term_order(mc[0]))
        self.terms: tuple = tuple(items)
        self._map = dict(items)
        self._key = tuple((tuple((a.key, p) for a, p in m), (c.numerator, c.denominator))
                          for m, c in items)
        self._hash = hash(self._key)

    # -- constructors --------------------------------------------------------
    @staticmethod
    def const(q: Number) -> "Poly":
        return Poly({(): q})

    @staticmethod
    def var(name: str) -> "Poly":
        return Poly({((Var(name), 1),): 1})

    @staticmethod
    def param(name: str) -> "Poly":
        return Poly({((Param(name), 1),): 1})

    @staticmethod
    def atom(a: Atom) -> "Poly":
        return Poly({((a, 1),): 1})

    @staticmethod
    def f(arg: "Poly") -> "Poly":
        return Poly({((FApp(lift(arg)), 1),): 1})

    # -- basic protocol ------------------------------------------------------
    @property
    def key(self) -> tuple:
        return self._key

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Poly.const(other)
        if not isinstance(other, Poly):
            return NotImplemented
        return self._key == other._key

    def __repr__(self):
        from .parse import render
        return f"Poly({render(self)!r})"

    def __bool__(self):
        return bool(self.terms)

    def coeff(self, mono: Mono) -> Fraction:
        return self._map.get(mono, Fraction(0))

    def items(self):
        return self.terms

    # -- arithmetic ----------------------------------------------------------
    def __add__(self, other):
        other = lift(other)
        acc = dict(self._map)
        for m, c in other.terms:
            acc[m] = acc.get(m, 0) + c
        return Poly(acc)

    __radd__ = __add__

    def __neg__(self):
        return Poly({m: -c for m, c in self.terms})

    def __sub__(self, other):
        return self + (-lift(other))

    def __rsub__(self, other):
        return lift(other) - self

    def __mul__(self, other):
        other = lift(other)
        if other.is_constant():
            k = other.constant_value()
            return Poly({m: c * k for m, c in self.terms})
        if self.is_constant():
            k = self.constant_value()
            return Poly({m: c * k for m, c in other.terms})
        acc: dict = {}
        for m1, c1 in self.terms:
            for m2, c2 in other.terms:
                m = _mono_mul(m1, m2)
                acc[m] = acc.get(m, 0) + c1 * c2
        return Poly(acc)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative exponents are not representable")
        k = len(self.terms)
        if k > 1 and math.comb(n + k - 1, k - 1) > MAX_EXPANSION_TERMS:
            raise ExpansionLimit(f"expanding a {k}-term sum to the power {n} is too large")
        result = Poly.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def scale(self, k: Number) -> "Poly":
        return Poly({m: c * k for m, c in self.terms})

    # -- inspection ----------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and self.terms[0][0] == ())

    def constant_value(self) -> Fraction:
        return self._map.get((), Fraction(0))

    def atoms(self) -> set[Atom]:
        """Top-level atoms (not descending into f-arguments)."""
        return {a for m, _ in self.terms for a, _ in m}

    def all_atoms(self) -> set[Atom]:
        out: set[Atom] = set()
        for m, _ in self.terms:
            for a, _ in m:
                out.add(a)
                if type(a) is FApp:
                    out |= a.arg.all_atoms()
        return out

    def variables(self) -> set[str]:
        return {a.name for a in self.all_atoms() if type(a) is Var}

    def parameters(self) -> set[str]:
        return {a.name for a in self.all_atoms() if type(a) is Param}

    def fapps(self) -> list[FApp]:
        """Every f-application, outermost-leftmost order, duplicates removed."""
        seen: list[FApp] = []
        for m, _ in self.terms:
            for a, _ in m:
                if type(a) is FApp:
                    if a not in seen:
                        seen.append(a)
                    for inner in a.arg.fapps():
                        if inner not in seen:
                            seen.append(inner)
        return seen

    def has_f(self) -> bool:
        return any(type(a) is FApp for a in self.atoms())

    def degree(self) -> int:
        return max((_mono_degree(m) for m, _ in self.terms), default=0)

    def degree_in(self, atom: Atom) -> int:
        return max((dict(m).get(atom, 0) for m, _ in self.terms), default=0)

    def as_atom(self) -> Atom | None:
        """The atom if this poly is exactly ``1*atom``."""
        if len(self.terms) == 1:
            m, c = self.terms[0]
            if c == 1 and len(m) == 1 and m[0][1] == 1:
                return m[0][0]
        return None

    def collect(self, atom: Atom) -> dict[int, "Poly"]:
        """Coefficients as a polynomial in one top-level atom."""
        out: dict[int, dict] = {}
        for m, c in self.terms:
            d = dict(m)
            p = d.pop(atom, 0)
            rest = tuple(sorted(d.items(), key=lambda ap: ap[0].key))
            out.setdefault(p, {})[rest] = out.setdefault(p, {}).get(rest, 0) + c
        return {p: Poly(v) for p, v in out.items()}

    def split_by(self, pred: Callable[[Atom], bool]) -> dict[Mono, "Poly"]:
        """Group terms by the sub-monomial of atoms satisfying ``pred``."""
        groups: dict[Mono, dict] = {}
        for m, c in self.terms:
            sel = tuple((a, p) for a, p in m if pred(a))
            rest = tuple((a, p) for a, p in m if not pred(a))
            g = groups.setdefault(sel, {})
            g[rest] = g.get(rest, 0) + c
        return {k: Poly(v) for k, v in groups.items()}

    def content(self) -> Fraction:
        """Leading coefficient in canonical term order (1 for zero)."""
        return self.terms[0][1] if self.terms else Fraction(1)

    def monic(self) -> "Poly":
        if not self.terms:
            return self
        return self.scale(1 / self.terms[0][1])


def lift(x) -> Poly:
    if isinstance(x, Poly):
        return x
    if isinstance(x, (int, Fraction)):
        return Poly.const(x)
    if isinstance(x, Expression):
        return normalize(x)
    raise TypeError(f"cannot lift {x!r} to Poly")


ZERO = Poly()
ONE = Poly.const(1)


def map_atoms(poly: Poly, fn: Callable[[Atom], Poly | None]) -> Poly:
    """Rebuild ``poly`` bottom-up, replacing atoms where ``fn`` returns a Poly.

    f-arguments are rewritten first, then ``fn`` sees the rebuilt application.
    """
    cache: dict[Atom, Poly] = {}

    def atom_value(a: Atom) -> Poly:
        if a in cache:
            return cache[a]
        if type(a) is FApp:
            new_arg = map_atoms(a.arg, fn)
            rebuilt = FApp(new_arg) if new_arg != a.arg else a
        else:
            rebuilt = a
        out = fn(rebuilt)
        if out is None:
            out = Poly.atom(rebuilt)
        cache[a] = out
        return out

    acc: dict = {}
    extra: list[Poly] = []
    for m, c in poly.terms:
        vals = [(atom_value(a), p) for a, p in m]
        if all(v.as_atom() is not None for v, _ in vals):
            merged: dict[Atom, int] = {}
            for v, p in vals:
                at = v.as_atom()
                merged[at] = merged.get(at, 0) + p
            mono = tuple(sorted(merged.items(), key=lambda ap: ap[0].key))
            acc[mono] = acc.get(mono, 0) + c
        else:
            term = Poly.const(c)
            for v, p in vals:
                term = term * (v ** p)
            extra.append(term)
    result = Poly(acc)
    for t in extra:
        result = result + t
    return result


def substitute(e, bindings: Mapping[str, object]) -> Poly:
    """Simultaneous replacement of variables (also inside f-arguments)."""
    poly = lift(e)
    if not bindings:
        return poly
    table = {k: lift(v) for k, v in bindings.items()}

    def fn(a: Atom):
        if type(a) is Var and a.name in table:
            return table[a.name]
        return None

    return map_atoms(poly, fn)


def substitute_params(e, bindings: Mapping[str, object]) -> Poly:
    poly = lift(e)
    if not bindings:
        return poly
    table = {k: lift(v) for k, v in bindings.items()}

    def fn(a: Atom):
        if type(a) is Param and a.name in table:
            return table[a.name]
        return None

    return map_atoms(poly, fn)


def apply_function(e, g: Callable[[Poly], Poly]) -> Poly:
    """Interpret f as the polynomial map ``g`` (innermost applications first)."""
    def fn(a: Atom):
        if type(a) is FApp:
            return g(a.arg)
        return None

    return map_atoms(lift(e), fn)


def equal(e1, e2) -> bool:
    return lift(e1) == lift(e2)


def evaluate(e, env: Mapping[str, Fraction], f: Callable[[Fraction], Fraction],
             params: Mapping[str, Fraction] | None = None) -> Fraction:
    """Exact numeric value of a canonical polynomial."""
    poly = lift(e)
    params = params or {}
    total = Fraction(0)
    for m, c in poly.terms:
        v = c
        for a, p in m:
            if type(a) is Var:
                x = env[a.name]
            elif type(a) is Param:
                x = params[a.name]
            else:
                x = f(evaluate(a.arg, env, f, params))
            v *= Fraction(x) ** p
        total += v
    return total


# ---------------------------------------------------------------------------
# Expression trees
# ---------------------------------------------------------------------------

class Expression:
    """Uncanonicalized syntax tree.  Arithmetic operators build new trees."""

    def __add__(self, other):
        return Sum((self, as_expr(other)))

    def __radd__(self, other):
        return Sum((as_expr(other), self))

    def __sub__(self, other):
        return Sum((self, Product((RationalConstant(-1), as_expr(other)))))

    def __rsub__(self, other):
        return Sum((as_expr(other), Product((RationalConstant(-1), self))))

    def __mul__(self, other):
        return Product((self, as_expr(other)))

    def __rmul__(self, other):
        return Product((as_expr(other), self))

    def __neg__(self):
        return Product((RationalConstant(-1), self))

    def __pow__(self, n: int):
        return power(self, n)


@dataclass(frozen=True)
class Variable(Expression):
    name: str


@dataclass(frozen=True)
class Parameter(Expression):
    name: str


@dataclass(frozen=True)
class RationalConstant(Expression):
    numerator: int
    denominator: int = 1

    def __post_init__(self):
        if self.denominator == 0:
            raise ZeroDivisionError("zero denominator")
        q = Fraction(self.numerator, self.denominator)
        object.__setattr__(self, "numerator", q.numerator)
        object.__setattr__(self, "denominator", q.denominator)

    @property
    def value(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)


@dataclass(frozen=True)
class FApply(Expression):
    argument: Expression


@dataclass(frozen=True)
class Sum(Expression):
    terms: tuple


@dataclass(frozen=True)
class Product(Expression):
    factors: tuple


@dataclass(frozen=True)
class Power(Expression):
    base: Expression
    exponent: int

    def __post_init__(self):
        if self.exponent < 2:
            raise ValueError("Power exponent must be >= 2; use power() to collapse")


def power(base: Expression, n: int) -> Expression:
    if n < 0:
        raise ValueError("negative exponent")
    if n == 0:
        return RationalConstant(1)
    if n == 1:
        return base
    return Power(base, n)


def as_expr(x) -> Expression:
    if isinstance(x, Expression):
        return x
    if isinstance(x, (int, Fraction)):
        q = Fraction(x)
        return RationalConstant(q.numerator, q.denominator)
    raise TypeError(f"cannot convert {x!r} to Expression")


def normalize(e) -> Poly:
    """Canonical form of an expression tree (identity on ``Poly``)."""
    if isinstance(e, Poly):
        return e
    if isinstance(e, (int, Fraction)):
        return Poly.const(e)
    if isinstance(e, Variable):
        return Poly.var(e.name)
    if isinstance(e, Parameter):
        return Poly.param(e.name)
    if isinstance(e, RationalConstant):
        return Poly.const(e.value)
    if isinstance(e, FApply):
        return Poly.f(normalize(e.argument))
    if isinstance(e, Sum):
        acc = ZERO
        for t in e.terms:
            acc = acc + normalize(t)
        return acc
    if isinstance(e, Product):
        acc = ONE
        for t in e.factors:
            acc = acc * normalize(t)
        return acc
    if isinstance(e, Power):
        return normalize(e.base) ** e.exponent
    raise TypeError(f"not an expression: {e!r}")


def evaluate_tree(e: Expression, env: Mapping[str, Fraction], f: Callable,
                  params: Mapping[str, Fraction] | None = None) -> Fraction:
    """Direct evaluation of a tree, without canonicalizing it first."""
    params = params or {}
    if isinstance(e, Variable):
        return Fraction(env[e.name])
    if isinstance(e, Parameter):
        return Fraction(params[e.name])
    if isinstance(e, RationalConstant):
        return e.value
    if isinstance(e, FApply):
        return Fraction(f(evaluate_tree(e.argument, env, f, params)))
    if isinstance(e, Sum):
        return sum((evaluate_tree(t, env, f, params) for t in e.terms), Fraction(0))
    if isinstance(e, Product):
        out = Fraction(1)
        for t in e.factors:
            out *= evaluate_tree(t, env, f, params)
        return out
    if isinstance(e, Power):
        return evaluate_tree(e.base, env, f, params) ** e.exponent
    raise TypeError(f"not an expression: {e!r}")


def to_expression(p: Poly) -> Expression:
    """A tree whose canonical form is ``p``."""
    def atom_expr(a: Atom) -> Expression:
        if type(a) is Var:
            return Variable(a.name)
        if type(a) is Param:
            return Parameter(a.name)
        return FApply(to_expression(a.arg))

    terms = []
    for m, c in p.terms:
        factors = [as_expr(c)] + [power(atom_expr(a), k) for a, k in m]
        terms.append(Product(tuple(factors)))
    return Sum(tuple(terms))


# ---------------------------------------------------------------------------
# Domains and facts
# ---------------------------------------------------------------------------

class DomainKind(enum.Enum):
    REALS = "R"
    POSITIVE_REALS = "R+"
    RATIONALS = "Q"
    INTEGERS = "Z"
    POSITIVE_INTEGERS = "N*"

    @property
    def token(self) -> str:
        return self.value

    @classmethod
    def from_token(cls, tok: str) -> "DomainKind":
        for d in cls:
            if d.value == tok:
                return d
        raise ValueError(f"unknown domain token {tok!r}")

    @property
    def integral(self) -> bool:
        return self in (DomainKind.INTEGERS, DomainKind.POSITIVE_INTEGERS)

    @property
    def positive(self) -> bool:
        return self in (DomainKind.POSITIVE_REALS, DomainKind.POSITIVE_INTEGERS)

    def contains(self, q) -> bool:
        q = Fraction(q)
        if self.integral and q.denominator != 1:
            return False
        if self.positive and q <= 0:
            return False
        return True

    def ground_pool(self) -> list[int]:
        return [v for v in (0, 1, -1) if self.contains(v)]


@dataclass(frozen=True, order=True)
class SideCondition:
    """A requirement recorded during a derivation but not proved.

    ``kind`` is one of ``positive``, ``nonzero``, ``in-domain``, ``natural``.
    """
    kind: str
    expr: Poly = field(compare=False)
    text: str = ""

    def __post_init__(self):
        if not self.text:
            from .parse import render
            object.__setattr__(self, "text", render(self.expr))

    def __hash__(self):
        return hash((self.kind, self.expr))

    def __eq__(self, other):
        return isinstance(other, SideCondition) and (self.kind, self.expr) == (other.kind, other.expr)

    def render(self) -> str:
        return f"{self.kind}({self.text})"


@dataclass(frozen=True)
class Fact:
    """Universally quantified equation ``lhs = rhs`` with bookkeeping."""
    lhs: Poly
    rhs: Poly
    quantified: tuple = ()          # ((name, DomainKind), ...)
    tail_bounds: frozenset = frozenset()   # {(name, Poly)}
    side_conditions: frozenset = frozenset()
    provenance: str = "axiom"
    codomain: DomainKind = DomainKind.REALS

    @property
    def var_names(self) -> list[str]:
        return [v for v, _ in self.quantified]

    def domain_of(self, name: str) -> DomainKind:
        for v, d in self.quantified:
            if v == name:
                return d
        raise KeyError(name)

    @property
    def domain(self) -> DomainKind:
        return self.quantified[0][1] if self.quantified else self.codomain

    def difference(self) -> Poly:
        return self.lhs - self.rhs

    def is_trivial(self) -> bool:
        return self.lhs == self.rhs

    def occurring_vars(self) -> set[str]:
        return (self.lhs.variables() | self.rhs.variables())

    def key(self) -> tuple:
        return fact_key(self.difference(), self.quantified)

    def conditional(self) -> bool:
        return bool(self.side_conditions)

    def render(self) -> str:
        from .parse import render
        head = ""
        if self.quantified:
            head = "forall " + " ".join(self.var_names) + ": "
        s = f"{head}{render(self.lhs)} = {render(self.rhs)}"
        if self.tail_bounds:
            s += " [" + ", ".join(f"{v} > {render(b)}" for v, b in sorted(self.tail_bounds, key=lambda vb: (vb[0], vb[1].key))) + "]"
        return s


def _alpha_variants(names: list[str]) -> Iterable[dict[str, str]]:
    canon = [f"_v{i}" for i in range(len(names))]
    if len(names) <= 4:
        for perm in itertools.permutations(canon):
            yield dict(zip(names, perm))
    else:
        yield dict(zip(sorted(names), canon))


def fact_key(diff: Poly, quantified: tuple) -> tuple:
    """Dedup key: primitive form of lhs-rhs, invariant under variable renaming."""
    diff = diff.monic()
    names = sorted(diff.variables())
    doms = dict(quantified)
    best = None
    for ren in _alpha_variants(names):
        k = substitute(diff, {a: Poly.var(b) for a, b in ren.items()}).key
        sig = tuple(sorted((ren[v], doms.get(v, DomainKind.REALS).value) for v in names))
        cand = (k, sig)
        if best is None or cand < best:
            best = cand
    return best if best is not None else (diff.key, ())


@dataclass(frozen=True)
class ShiftFact:
    """``f(t + shift) = f(t) + delta`` for every ``t`` above ``tail``."""
    shift: Poly
    delta: Poly
    tail: Poly | None = None
    parameters: tuple = ()
    domain: DomainKind = DomainKind.REALS
    codomain: DomainKind = DomainKind.REALS
    side_conditions: frozenset = frozenset()
    provenance: str = ""

    def to_fact(self, var: str = "t") -> Fact:
        t = Poly.var(var)
        tails = frozenset({(var, self.tail)}) if self.tail is not None else frozenset()
        quant = ((var, self.domain),) + tuple((p, self.domain) for p in self.parameters)
        return Fact(Poly.f(t + self.shift), Poly.f(t) + self.delta, quant, tails,
                    self.side_conditions, self.provenance or "shift", self.codomain)

    def render(self) -> str:
        from .parse import render
        s = f"f(t + {render(self.shift)}) = f(t) + {render(self.delta)}"
        if self.tail is not None:
            s += f" [t > {render(self.tail)}]"
        return s


class PropertyKind(enum.Enum):
    INJECTIVE = "injective"
    SURJECTIVE_ONTO_TAIL = "surjective-onto-tail"
    SURJECTIVE = "surjective"
    ADDITIVE = "additive"
    ODD = "odd"
    POINT_VALUE = "point-value"


@dataclass(frozen=True)
class PropertyFact:
    """A property of f, or of an expression ``subject`` in variable ``var``."""
    kind: PropertyKind
    subject: Poly | None = None
    var: str | None = None
    bound: Poly | None = None
    point: Poly | None = None
    value: Poly | None = None
    provenance: str = ""

    def __post_init__(self):
        if self.kind is PropertyKind.POINT_VALUE:
            for e in (self.point, self.value):
                if e is None or e.variables():
                    raise ValueError("point values must be ground")

    def render(self) -> str:
        from .parse import render
        who = "f" if self.subject is None else f"({self.var} -> {render(self.subject)})"
        if self.kind is PropertyKind.POINT_VALUE:
            return f"f({render(self.point)}) = {render(self.value)}"
        if self.kind is PropertyKind.SURJECTIVE_ONTO_TAIL:
            return f"{who} surjective onto ({render(self.bound)}, +inf)"
        return f"{who} {self.kind.value}"
