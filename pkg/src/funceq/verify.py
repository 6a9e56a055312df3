"""Candidate verification by exact coefficient matching.

A candidate family is substituted for every application of ``f``; the
difference of the two sides becomes one quotient whose numerator is a
polynomial in the quantified variables.  Because every domain is infinite,
the identity holds exactly when each coefficient of that numerator (a
polynomial in the family's parameters) vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Mapping

from .core import (DomainKind, FApp, Param, Poly, Var, ZERO, lift, map_atoms,
                   substitute_params)
from .family import CandidateFamily, RatFunc, UnsupportedFamily

SATISFIABLE = "Satisfiable"
RESIDUAL = "Residual"
UNSATISFIABLE = "Unsatisfiable"
UNSOLVED = "Unsolved"

MAX_ROOT_DEGREE = 4


@dataclass(frozen=True)
class Branch:
    assignment: tuple = ()          # ((param, Poly), ...) sorted by name
    residual: tuple = ()            # canonical monic constraint polys

    def as_dict(self) -> dict[str, Poly]:
        return dict(self.assignment)

    def constraint_set(self) -> frozenset:
        """The branch as a set of monic equations ``poly = 0``."""
        eqs = {(Poly.param(p) - v).monic() for p, v in self.assignment}
        eqs |= {r.monic() for r in self.residual}
        return frozenset(eqs)

    def render(self) -> str:
        from .parse import render, render_equation
        parts = [f"{p} = {render(v)}" for p, v in self.assignment]
        parts += [render_equation(r) for r in self.residual]
        return ", ".join(parts) if parts else "no constraints"


@dataclass(frozen=True)
class ConstraintSet:
    constraints: tuple                     # canonical monic polys over parameters
    family: CandidateFamily | None = None
    domain: DomainKind = DomainKind.REALS
    codomain: DomainKind = DomainKind.REALS
    denominators: tuple = ()               # cleared denominators, required nonzero
    branches: tuple = ()
    status: str = UNSOLVED

    @property
    def linear(self) -> dict[str, Poly]:
        """Assignments shared by every branch."""
        if not self.branches:
            return {}
        common = dict(self.branches[0].assignment)
        for br in self.branches[1:]:
            d = dict(br.assignment)
            common = {k: v for k, v in common.items() if d.get(k) == v}
        return common

    @property
    def residual(self) -> tuple:
        out = []
        for br in self.branches:
            for r in br.residual:
                if r not in out:
                    out.append(r)
        return tuple(out)

    def render(self) -> str:
        if self.status == UNSOLVED:
            from .parse import render
            return "; ".join(f"{render(c)} = 0" for c in self.constraints) or "no constraints"
        if self.status == UNSATISFIABLE:
            return "Unsatisfiable"
        return " | ".join(br.render() for br in self.branches)

    def branch_sets(self) -> frozenset:
        return frozenset(br.constraint_set() for br in self.branches)


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------

def _to_ratfunc(poly: Poly, fam: CandidateFamily, cache: dict) -> RatFunc:
    """Value of ``poly`` with f interpreted as the family, as a quotient."""
    acc = RatFunc(ZERO)
    for m, c in poly.terms:
        term = RatFunc(Poly.const(c))
        for a, p in m:
            if type(a) is FApp:
                val = cache.get(a)
                if val is None:
                    val = fam.compose(_to_ratfunc(a.arg, fam, cache))
                    cache[a] = val
                term = term * (val ** p)
            else:
                term = term * RatFunc(Poly.atom(a) ** p)
        acc = acc + term
    return acc


def _coefficients(num: Poly) -> list[Poly]:
    groups = num.split_by(lambda a: type(a) is Var)
    return [groups[k] for k in sorted(groups, key=lambda m: tuple((a.key, p) for a, p in m))]


def _canonical_constraints(polys) -> tuple:
    seen = []
    for c in polys:
        if c.is_zero():
            continue
        m = c.monic()
        if m not in seen:
            seen.append(m)
    return tuple(sorted(seen, key=lambda p: p.key))


def substitute_candidate(p, fam: CandidateFamily, params: Mapping[str, object] | None = None
                         ) -> ConstraintSet:
    """Coefficient constraints (unsolved) for the family in the problem's equation."""
    eq = p.equation if hasattr(p, "equation") else p
    lhs, rhs = eq.lhs, eq.rhs
    if params:
        lhs, rhs = substitute_params(lhs, params), substitute_params(rhs, params)
        fam = fam.assign({k: v for k, v in params.items() if k in fam.free_parameters()})
    cache: dict = {}
    diff = _to_ratfunc(lhs, fam, cache) - _to_ratfunc(rhs, fam, cache)
    dens = []
    for val in cache.values():
        if not val.den.is_constant() and val.den not in dens:
            dens.append(val.den)
    if diff.den.is_zero():
        raise UnsupportedFamily("family leaves a zero denominator")
    constraints = _canonical_constraints(_coefficients(diff.num))
    domain = getattr(p, "domain", eq.domain)
    codomain = getattr(p, "codomain", eq.codomain)
    return ConstraintSet(constraints, fam, domain, codomain, tuple(dens))


# ---------------------------------------------------------------------------
# Solving
# ---------------------------------------------------------------------------

def _only_params(poly: Poly) -> bool:
    return all(type(a) is Param for a in poly.all_atoms())


def _is_linear(poly: Poly) -> bool:
    return poly.degree() == 1


def _univariate(poly: Poly) -> str | None:
    ps = poly.parameters()
    return next(iter(ps)) if len(ps) == 1 else None


def _divisors(n: int) -> list[int]:
    n = abs(n)
    out = []
    i = 1
    while i * i <= n:
        if n % i == 0:
            out.append(i)
            if i != n // i:
                out.append(n // i)
        i += 1
    return sorted(out)


def rational_roots(coeffs: dict[int, Fraction]) -> tuple[list[Fraction], dict[int, Fraction]]:
    """Rational roots (with multiplicity, descending) and the remaining cofactor."""
    coeffs = {k: Fraction(v) for k, v in coeffs.items() if v}
    roots: list[Fraction] = []
    if coeffs and min(coeffs) > 0:
        low = min(coeffs)
        roots.extend([Fraction(0)] * low)
        coeffs = {k - low: v for k, v in coeffs.items()}
    changed = True
    while changed and coeffs and max(coeffs) > 0:
        changed = False
        lcm = 1
        for v in coeffs.values():
            lcm = lcm * v.denominator // _gcd(lcm, v.denominator)
        ints = {k: int(v * lcm) for k, v in coeffs.items()}
        deg = max(ints)
        lead, const = ints[deg], ints.get(0, 0)
        cands = set()
        for pn in _divisors(const):
            for qd in _divisors(lead):
                cands.add(Fraction(pn, qd))
                cands.add(Fraction(-pn, qd))
        for r in sorted(cands, reverse=True):
            if sum(v * r ** k for k, v in coeffs.items()) == 0:
                roots.append(r)
                coeffs = _deflate(coeffs, r)
                changed = True
                break
    roots.sort(reverse=True)
    return roots, coeffs


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return abs(a)


def _deflate(coeffs: dict[int, Fraction], r: Fraction) -> dict[int, Fraction]:
    deg = max(coeffs)
    out: dict[int, Fraction] = {}
    carry = Fraction(0)
    for k in range(deg, 0, -1):
        carry = coeffs.get(k, Fraction(0)) + carry * r if k < deg else coeffs[deg]
        out[k - 1] = carry
    return {k: v for k, v in out.items() if v}


def _compose_assignment(assign: dict[str, Poly], name: str, value: Poly) -> dict[str, Poly]:
    out = {k: substitute_params(v, {name: value}) for k, v in assign.items()}
    out[name] = value
    return out


def _solve(cons: list[Poly], assign: dict[str, Poly], residual: list[Poly], out: list):
    cons = [substitute_params(c, assign) if assign else c for c in cons]
    cons = list(_canonical_constraints(cons))
    residual = list(_canonical_constraints(substitute_params(r, assign) for r in residual))
    if any(c.is_constant() for c in cons) or any(r.is_constant() for r in residual):
        return
    if not cons:
        out.append((assign, residual))
        return
    for c in cons:
        if _is_linear(c):
            m, coef = c.terms[0]
            pivot = m[0][0].name
            value = (c - Poly({m: coef})).scale(-1 / coef)
            rest = [d for d in cons if d is not c]
            _solve(rest, _compose_assignment(assign, pivot, value), residual, out)
            return
    for c in cons:
        name = _univariate(c)
        if name is None or c.degree() > MAX_ROOT_DEGREE:
            continue
        co = {k: v.constant_value() for k, v in c.collect(Param(name)).items()}
        roots, cofactor = rational_roots(co)
        rest = [d for d in cons if d is not c]
        for r in dict.fromkeys(roots):
            _solve(rest, _compose_assignment(assign, name, Poly.const(r)), residual, out)
        if cofactor and max(cofactor) > 0:
            x = Poly.param(name)
            left = sum((x ** k * Poly.const(v) for k, v in cofactor.items()), ZERO)
            _solve(rest, dict(assign), residual + [left], out)
        return
    for c in cons:
        if len(c.terms) == 1:
            rest = [d for d in cons if d is not c]
            for a, _ in c.terms[0][0]:
                _solve(rest, _compose_assignment(assign, a.name, ZERO), residual, out)
            return
    out.append((assign, residual + cons))


def _sample_points(dom: DomainKind) -> list[Fraction]:
    if dom.integral:
        pts = [1, 2, 3, 5] if dom.positive else [-3, -1, 0, 1, 2, 5]
    elif dom.positive:
        pts = [Fraction(1, 3), 1, 2, Fraction(7, 2)]
    else:
        pts = [Fraction(-5, 2), -1, 0, Fraction(1, 2), 1, 3]
    return [Fraction(v) for v in pts]


def admissible(fam: CandidateFamily, domain: DomainKind, codomain: DomainKind) -> bool:
    """Concrete families must map sampled domain points into the codomain."""
    if fam.free_parameters():
        return True
    for q in _sample_points(domain):
        try:
            v = fam.value(q)
        except ZeroDivisionError:
            return False
        if not codomain.contains(v):
            return False
    return True


def denominators_ok(dens, assign: Mapping[str, Poly], domain: DomainKind) -> bool:
    """Cleared denominators must not vanish; discharged syntactically over R+."""
    for d in dens:
        d = substitute_params(d, assign)
        if d.parameters():
            continue
        if d.is_zero():
            return False
        if domain.positive:
            coefs = [c for _, c in d.terms]
            if all(c >= 0 for c in coefs) and any(len(m) <= 1 for m, _ in d.terms):
                continue
            return False
    return True


def solve_constraints(cs: ConstraintSet) -> ConstraintSet:
    raw: list = []
    _solve(list(cs.constraints), {}, [], raw)
    branches = []
    for assign, residual in raw:
        if cs.family is not None:
            fam = cs.family.assign(assign) if assign else cs.family
            if not residual and not admissible(fam, cs.domain, cs.codomain):
                continue
            if not denominators_ok(cs.denominators, assign, cs.domain):
                continue
        br = Branch(tuple(sorted(assign.items())), tuple(_canonical_constraints(residual)))
        if br not in branches:
            branches.append(br)
    if not branches:
        status = UNSATISFIABLE
    elif any(br.residual for br in branches):
        status = RESIDUAL
    else:
        status = SATISFIABLE
    return ConstraintSet(cs.constraints, cs.family, cs.domain, cs.codomain, cs.denominators,
                         tuple(branches), status)


def verify_family(p, fam: CandidateFamily, params: Mapping[str, object] | None = None
                  ) -> ConstraintSet:
    return solve_constraints(substitute_candidate(p, fam, params))


def verify_concrete(p, closed_form: CandidateFamily,
                    params: Mapping[str, object] | None = None) -> bool:
    cs = substitute_candidate(p, closed_form, params)
    if cs.family is not None and cs.family.free_parameters():
        raise ValueError("verify_concrete needs every family parameter assigned")
    return not cs.constraints and admissible(cs.family, cs.domain, cs.codomain)


def solutions(cs: ConstraintSet) -> list[CandidateFamily]:
    """Concrete (or partially assigned) members of a solved constraint set."""
    out = []
    for br in cs.branches:
        fam = cs.family.assign(br.as_dict()) if br.assignment else cs.family
        out.append(fam)
    return out


# ---------------------------------------------------------------------------
# Expectations
# ---------------------------------------------------------------------------

def expected_sets(branches, params: Mapping[str, object] | None = None) -> frozenset | None:
    """Expected branches as sets of monic equations; fixed ``params`` are substituted
    and each branch re-solved so it compares with a solver result."""
    if branches is None:
        return None
    if not params:
        return frozenset(frozenset(c.monic() for c in br if not c.is_zero()) for br in branches)
    out = set()
    for br in branches:
        raw: list = []
        _solve([substitute_params(c, params) for c in br], {}, [], raw)
        for assign, residual in raw:
            out.add(Branch(tuple(sorted(assign.items())),
                           tuple(_canonical_constraints(residual))).constraint_set())
    return frozenset(out)


def check_expectation(p, expectation, params=None) -> tuple[bool, ConstraintSet]:
    cs = verify_family(p, expectation.family, params)
    want = expected_sets(expectation.branches, params)
    if want is None:
        return cs.status == UNSATISFIABLE, cs
    return cs.status != UNSATISFIABLE and cs.branch_sets() == want, cs
