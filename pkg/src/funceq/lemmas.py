"""Named lemmas as pattern-triggered tactics.

Each tactic inspects the canonical form of a fact and returns a new fact,
shift, property or candidate family, or ``None`` when the fact does not have
the lemma's shape.  Fresh symbolic constants are requested through a
``fresh(prefix)`` callable so that the caller controls naming.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

from .core import (DomainKind, FApp, Fact, Param, Poly, PropertyFact, PropertyKind,
                   ShiftFact, SideCondition, Var, ZERO, lift, substitute)
from .family import CandidateFamily, FAMILY_VAR
from .rewrite import evidently_in

Fresh = Callable[[str], str]


def _default_fresh() -> Fresh:
    counters: dict[str, int] = {}

    def fresh(prefix: str) -> str:
        counters[prefix] = counters.get(prefix, 0) + 1
        return f"{prefix}{counters[prefix]}"

    return fresh


def _single_fapp(poly: Poly) -> FApp | None:
    a = poly.as_atom()
    return a if type(a) is FApp else None


def _fvar(name: str) -> FApp:
    return FApp(Poly.var(name))


def _free_of(poly: Poly, *names: str) -> bool:
    return not (poly.variables() & set(names))


# ---------------------------------------------------------------------------
# Iteration lemma and shifts
# ---------------------------------------------------------------------------

def iteration_lemma(fact: Fact, param_domains: Mapping[str, DomainKind] | None = None
                    ) -> ShiftFact | None:
    """``f(f(X) + S1) = X + S2`` gives the shift ``f(t + K) = f(t) + K``, ``K = S1 + S2``."""
    for lhs, rhs in ((fact.lhs, fact.rhs), (fact.rhs, fact.lhs)):
        outer = _single_fapp(lhs)
        if outer is None:
            continue
        for x in fact.var_names:
            fx = Poly.f(Poly.var(x))
            if outer.arg.coeff(fx.terms[0][0]) != 1 or rhs.coeff(((Var(x), 1),)) != 1:
                continue
            s1 = outer.arg - fx
            s2 = rhs - Poly.var(x)
            if not (_free_of(s1, x) and _free_of(s2, x)):
                continue
            k = s1 + s2
            if k.is_zero():
                continue
            dom = fact.domain_of(x)
            side = set(fact.side_conditions)
            var_doms = dict(fact.quantified)
            inner = fx + s1
            if not evidently_in(inner, dom, var_doms, param_domains, fact.codomain):
                side.add(SideCondition("in-domain", inner))
            params = tuple(v for v in fact.var_names if v in k.variables())
            tail = dict(fact.tail_bounds).get(x)
            return ShiftFact(k, k, tail, params, dom, fact.codomain, frozenset(side),
                             "iteration_lemma")
    return None


def extend_shift(s: ShiftFact, n: int) -> ShiftFact:
    """``f(t + N*c) = f(t) + N*d``."""
    if n < 1:
        raise ValueError("multiplier must be a positive integer")
    return ShiftFact(s.shift.scale(n), s.delta.scale(n), s.tail, s.parameters, s.domain,
                     s.codomain, s.side_conditions, f"extend_shift({n})")


# ---------------------------------------------------------------------------
# Cauchy-type lemma
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CtlResult:
    shifts: tuple
    additive: Fact
    fresh: tuple                    # names introduced: (s, t, M) subset


def _ctl_parts(fact: Fact):
    """Yield (X, Y, u, v, w) with ``f(X+Y) = f(X+u) + f(Y+v) + w``."""
    diff = fact.difference()
    names = fact.var_names
    for i, x in enumerate(names):
        for y in names:
            if y == x:
                continue
            xy = FApp(Poly.var(x) + Poly.var(y))
            mono_xy = ((xy, 1),)
            c = diff.coeff(mono_xy)
            if c == 0:
                continue
            d = diff.scale(1 / c)
            fx = fy = None
            for m, k in d.terms:
                if len(m) != 1 or m[0][1] != 1 or type(m[0][0]) is not FApp or k != -1:
                    continue
                arg = m[0][0].arg
                vs = arg.variables()
                if fx is None and vs & {x, y} == {x} and (arg - Poly.var(x)).variables().isdisjoint({x, y}):
                    fx = m
                elif fy is None and vs & {x, y} == {y} and (arg - Poly.var(y)).variables().isdisjoint({x, y}):
                    fy = m
            if fx is None or fy is None:
                continue
            rest = d - Poly({mono_xy: 1}) + Poly({fx: 1}) + Poly({fy: 1})
            if not _free_of(rest, x, y):
                continue
            u = fx[0][0].arg - Poly.var(x)
            v = fy[0][0].arg - Poly.var(y)
            yield x, y, u, v, -rest


def ctl(fact: Fact, fresh: Fresh | None = None) -> CtlResult | None:
    """``f(X+Y) = f(X+u) + f(Y+v) + w`` becomes additive-plus-constant above a tail.

    Intermediate shifts: ``f(t + (u - v)) = f(t) + s`` when ``u != v`` and
    ``f(t + v) = f(t) + t0`` when ``v != 0``.  Then
    ``f(X+Y) = f(X) + f(Y) + w + s + 2*t0`` for ``X, Y`` above a fresh ``M``.
    """
    fresh = fresh or _default_fresh()
    for x, y, u, v, w in _ctl_parts(fact):
        dom = fact.domain_of(x)
        shifts = []
        names = []
        has_tail = bool(fact.tail_bounds)
        m_name = fresh("M") if (has_tail or dom.positive) else None
        tail = Poly.param(m_name) if m_name else None
        if m_name:
            names.append(m_name)
        s = ZERO
        if u != v:
            s_name = fresh("s")
            names.append(s_name)
            s = Poly.param(s_name)
            shifts.append(ShiftFact(u - v, s, tail, (), dom, fact.codomain,
                                    fact.side_conditions, "ctl"))
        t0 = ZERO
        if not v.is_zero():
            t_name = fresh("t")
            names.append(t_name)
            t0 = Poly.param(t_name)
            shifts.append(ShiftFact(v, t0, tail, (), dom, fact.codomain,
                                    fact.side_conditions, "ctl"))
        w2 = w + s + t0.scale(2)
        tails = frozenset({(x, tail), (y, tail)}) if tail is not None else frozenset()
        add = Fact(Poly.f(Poly.var(x) + Poly.var(y)),
                   Poly.f(Poly.var(x)) + Poly.f(Poly.var(y)) + w2,
                   ((x, dom), (y, fact.domain_of(y))), tails, fact.side_conditions,
                   "ctl", fact.codomain)
        return CtlResult(tuple(shifts), add, tuple(names))
    return None


def additive_constant(fact: Fact) -> tuple[str, str, Poly] | None:
    """``(X, Y, w)`` when the fact reads ``f(X+Y) = f(X) + f(Y) + w``."""
    for x, y, u, v, w in _ctl_parts(fact):
        if u.is_zero() and v.is_zero():
            return x, y, w
    return None


# ---------------------------------------------------------------------------
# Jensen and linearity of bounded additive maps
# ---------------------------------------------------------------------------

def _linear_in(arg: Poly, var: str) -> tuple[Fraction, Poly] | None:
    co = arg.collect(Var(var))
    if set(co) - {0, 1} or 1 not in co or not co[1].is_constant():
        return None
    off = co.get(0, ZERO)
    if off.variables():
        return None
    return co[1].constant_value(), off


def jensen(fact: Fact, fresh: Fresh | None = None) -> CandidateFamily | None:
    """``f(pX+q) + f(pY+q) = 2 f(p(X+Y)/2 + q)`` (any scalar multiple) gives ``a*x + b``."""
    diff = fact.difference()
    if len(diff.terms) != 3:
        return None
    atoms = []
    for m, c in diff.terms:
        if len(m) != 1 or m[0][1] != 1 or type(m[0][0]) is not FApp:
            return None
        atoms.append((m[0][0].arg, c))
    names = fact.var_names
    if len(names) < 2:
        return None
    for i in range(3):
        mid, cm = atoms[i]
        ends = [atoms[j] for j in range(3) if j != i]
        if ends[0][1] != ends[1][1] or cm != -2 * ends[0][1]:
            continue
        (a1, _), (a2, _) = ends
        v1, v2 = sorted(a1.variables()), sorted(a2.variables())
        if len(v1) != 1 or len(v2) != 1 or v1 == v2:
            continue
        l1, l2 = _linear_in(a1, v1[0]), _linear_in(a2, v2[0])
        if l1 is None or l2 is None or l1 != l2:
            continue
        if (a1 + a2).scale(Fraction(1, 2)) != mid:
            continue
        fresh = fresh or (lambda p: p)
        a, b = fresh("a"), fresh("b")
        x = Poly.var(FAMILY_VAR)
        signs = ()
        if fact.codomain.positive:
            signs = ((a, "nonnegative"), (b, "nonnegative"), (f"{a},{b}", "not-both-zero"))
        tails = dict(fact.tail_bounds)
        validity = tails.get(v1[0])
        return CandidateFamily.polynomial(Poly.param(a) * x + Poly.param(b),
                                          parameters=(a, b), validity=validity,
                                          sign_constraints=signs, note="jensen")
    return None


def bounded_additive_linear(additive: Fact, codomain: DomainKind,
                            fresh: Fresh | None = None) -> CandidateFamily | None:
    """Additive-plus-constant ``f`` that is bounded below (or on Q/Z) is ``c*x - w``."""
    parts = additive_constant(additive)
    if parts is None:
        return None
    x, y, w = parts
    dom = additive.domain_of(x)
    if dom is DomainKind.REALS and not codomain.positive:
        return None
    if dom is DomainKind.POSITIVE_REALS and not codomain.positive:
        return None
    fresh = fresh or (lambda p: p)
    c = fresh("c")
    xv = Poly.var(FAMILY_VAR)
    validity = dict(additive.tail_bounds).get(x)
    return CandidateFamily.polynomial(Poly.param(c) * xv - w, validity=validity,
                                      note="bounded_additive_linear")


# ---------------------------------------------------------------------------
# Composition lemma
# ---------------------------------------------------------------------------

def _linear_map(h: Poly, var: str) -> tuple[Fraction, Poly] | None:
    if h.has_f() or h.variables() != {var}:
        return None
    lin = _linear_in(h, var)
    if lin is None or lin[0] == 0:
        return None
    return lin


def composition_lemma(eq: Fact, known: PropertyFact | None = None,
                      fresh: Fresh | None = None) -> tuple | None:
    """From ``f(G(v)) = H(v)`` deduce injectivity/surjectivity of ``G``.

    ``H`` must be affine in ``v`` with nonzero slope (hence injective, and
    surjective onto the domain or onto a tail).  ``known`` supplies
    injectivity of ``f``; without it only injectivity of ``G`` follows.
    """
    for lhs, rhs in ((eq.lhs, eq.rhs), (eq.rhs, eq.lhs)):
        outer = _single_fapp(lhs)
        if outer is None:
            continue
        gvars = outer.arg.variables()
        if len(gvars) != 1:
            continue
        (v,) = gvars
        lin = _linear_map(rhs, v)
        if lin is None:
            continue
        out = [PropertyFact(PropertyKind.INJECTIVE, outer.arg, v, provenance="composition_lemma")]
        f_injective = known is not None and known.kind is PropertyKind.INJECTIVE and known.subject is None
        if f_injective:
            dom = eq.domain_of(v)
            if dom.positive:
                fresh = fresh or (lambda p: p)
                out.append(PropertyFact(PropertyKind.SURJECTIVE_ONTO_TAIL, outer.arg, v,
                                        bound=Poly.param(fresh("M")),
                                        provenance="composition_lemma"))
            elif dom in (DomainKind.REALS, DomainKind.RATIONALS):
                out.append(PropertyFact(PropertyKind.SURJECTIVE, outer.arg, v,
                                        provenance="composition_lemma"))
        return tuple(out)
    return None


# ---------------------------------------------------------------------------
# k-fold iteration and the cross swap
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParamShiftFact:
    """``f(X + k*A) = f(X) + k*B`` for every natural (over Z: integer) ``k``."""
    a_expr: Poly
    b_expr: Poly
    base_var: str
    param_var: str
    k_symbol: str = "k"
    quantified: tuple = ()          # variables of A and B with domains
    domain: DomainKind = DomainKind.INTEGERS
    codomain: DomainKind = DomainKind.INTEGERS
    side_conditions: frozenset = field(default_factory=frozenset)
    provenance: str = "kfold_iteration"

    def instance(self, k) -> Fact:
        k = lift(k)
        x = Poly.var(self.base_var)
        quant = ((self.base_var, self.domain),) + self.quantified
        return Fact(Poly.f(x + k * self.a_expr), Poly.f(x) + k * self.b_expr, quant,
                    frozenset(), self.side_conditions, "kfold_instance", self.codomain)

    def render(self) -> str:
        from .parse import render
        k = self.k_symbol
        return (f"forall {k}: f({self.base_var} + {k}*({render(self.a_expr)})) = "
                f"f({self.base_var}) + {k}*({render(self.b_expr)})")


def kfold_iteration(fact: Fact) -> ParamShiftFact | None:
    """``f(X + A) = f(X) + B`` (A, B free of X) iterated k times, integer domains only."""
    if not fact.quantified or not all(d.integral for _, d in fact.quantified):
        return None
    diff = fact.difference()
    for x in fact.var_names:
        fx_mono = ((_fvar(x), 1),)
        cx = diff.coeff(fx_mono)
        if cx == 0:
            continue
        shifted = None
        for m, c in diff.terms:
            if c != -cx or len(m) != 1 or m[0][1] != 1 or type(m[0][0]) is not FApp:
                continue
            arg = m[0][0].arg
            if arg.coeff(((Var(x), 1),)) != 1:
                continue
            a = arg - Poly.var(x)
            if a.is_zero() or not _free_of(a, x):
                continue
            shifted = (m, a)
            break
        if shifted is None:
            continue
        m, a = shifted
        d = diff.scale(1 / -cx)             # f(X+A) - f(X) - B
        b = Poly({m: 1}) - Poly({fx_mono: 1}) - d
        if not _free_of(b, x) or b.is_zero():
            continue
        params = sorted((a.variables() | b.variables()))
        if not params:
            continue
        quant = tuple((v, fact.domain_of(v)) for v in fact.var_names if v in params)
        side = set(fact.side_conditions)
        if fact.domain_of(x) is DomainKind.POSITIVE_INTEGERS:
            side.add(SideCondition("natural", a))
        return ParamShiftFact(a, b, x, params[0], "k", quant, fact.domain_of(x),
                              fact.codomain, frozenset(side))
    return None


def cross_swap(p: ParamShiftFact, new_var: str | None = None) -> Fact:
    """Instantiate k at A(Z) and at A(Y) and subtract: ``B(Y)*A(Z) = B(Z)*A(Y)``."""
    y = p.param_var
    used = {v for v, _ in p.quantified} | {p.base_var}
    z = new_var
    if z is None:
        z = "z"
        i = 1
        while z in used:
            z = f"z{i}"
            i += 1
    # second copy: y becomes z, any other parameter variable gets a primed twin
    ren = {y: z}
    for v, _ in p.quantified:
        if v != y:
            ren[v] = v + "2"
    table = {k: Poly.var(v) for k, v in ren.items()}
    a_y, b_y = p.a_expr, p.b_expr
    a_z, b_z = substitute(p.a_expr, table), substitute(p.b_expr, table)
    quant = p.quantified + tuple((ren[v], d) for v, d in p.quantified)
    side = set(p.side_conditions)
    if p.domain is DomainKind.POSITIVE_INTEGERS:
        side.add(SideCondition("natural", a_z))
    return Fact(b_y * a_z, b_z * a_y, quant, frozenset(), frozenset(side), "cross_swap",
                p.codomain)


# ---------------------------------------------------------------------------
# Cancellation
# ---------------------------------------------------------------------------

def common_param_factor(poly: Poly) -> tuple:
    """Largest parameter monomial dividing every term (as a monomial tuple)."""
    if poly.is_zero():
        return ()
    common: dict | None = None
    for m, _ in poly.terms:
        pm = {a: p for a, p in m if type(a) is Param}
        if common is None:
            common = pm
        else:
            common = {a: min(p, pm[a]) for a, p in common.items() if a in pm}
        if not common:
            return ()
    return tuple(sorted(common.items(), key=lambda ap: ap[0].key))


def divide_monomial(poly: Poly, mono: tuple) -> Poly:
    unit = dict(mono)
    out = {}
    for m, c in poly.terms:
        d = dict(m)
        for a, p in unit.items():
            if d.get(a, 0) < p:
                raise ValueError("monomial does not divide the polynomial")
            d[a] -= p
            if d[a] == 0:
                del d[a]
        out[tuple(sorted(d.items(), key=lambda ap: ap[0].key))] = c
    return Poly(out)


def cancel(fact: Fact, param_domains: Mapping[str, DomainKind] | None = None) -> Fact | None:
    """Divide ``lhs - rhs`` by a common parameter monomial, recording it nonzero."""
    diff = fact.difference()
    mono = common_param_factor(diff)
    if not mono:
        return None
    reduced = divide_monomial(diff, mono)
    factor = Poly({mono: 1})
    side = set(fact.side_conditions)
    param_domains = param_domains or {}
    if not all(param_domains.get(a.name, DomainKind.REALS).positive for a, _ in mono):
        side.add(SideCondition("nonzero", factor))
    return Fact(reduced, Poly(), fact.quantified, fact.tail_bounds, frozenset(side),
                "cancel", fact.codomain)
