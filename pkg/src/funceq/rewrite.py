"""Primitive moves on facts: instantiation, subtraction, shift differences,
and rewriting with a known fact used as a left-to-right (or right-to-left)
rule.

Matching is syntactic on canonical forms.  A rule side must be a single
application ``f(pattern)``; the pattern's quantified variables are match
variables.  The matcher walks the target's f-applications outermost-leftmost
(left-hand side first) and takes the first binding that does not collapse the
target to ``0 = 0``.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterator, Mapping

from .core import (FApp, Fact, Param, Poly, ShiftFact, SideCondition, Var, DomainKind,
                   lift, map_atoms, substitute)

LTR = "ltr"
RTL = "rtl"


class MoveError(ValueError):
    """A move's precondition failed (bad binding, no match, domain clash)."""


class NoMatch(MoveError):
    pass


# ---------------------------------------------------------------------------
# Syntactic domain evidence
# ---------------------------------------------------------------------------

def _atom_domain(a, var_doms, param_doms, codomain) -> DomainKind | None:
    if type(a) is Var:
        return var_doms.get(a.name)
    if type(a) is Param:
        return param_doms.get(a.name)
    return codomain


def evidently_in(e, dom: DomainKind, var_doms: Mapping[str, DomainKind],
                 param_doms: Mapping[str, DomainKind] | None = None,
                 codomain: DomainKind | None = None) -> bool:
    """True when ``e`` lies in ``dom`` for every admissible value of its atoms."""
    poly = lift(e)
    param_doms = param_doms or {}
    if poly.is_constant():
        return dom.contains(poly.constant_value())
    if dom is DomainKind.REALS:
        return True
    atom_doms = [_atom_domain(a, var_doms, param_doms, codomain)
                 for a in poly.atoms()]
    if any(d is None for d in atom_doms):
        return False
    if dom is DomainKind.RATIONALS:
        return all(d is not DomainKind.REALS and d is not DomainKind.POSITIVE_REALS
                   for d in atom_doms)
    if dom.integral:
        if any(c.denominator != 1 for _, c in poly.terms):
            return False
        if not all(d.integral for d in atom_doms):
            return False
    if dom.positive:
        if any(c <= 0 for _, c in poly.terms):
            return False
        if not all(d.positive for d in atom_doms):
            return False
    return True


def plausibly_in(e, dom: DomainKind) -> bool:
    """False only when ``e`` is certainly outside ``dom`` (constants, fractions)."""
    poly = lift(e)
    if poly.is_constant():
        return dom.contains(poly.constant_value())
    if dom.integral and any(c.denominator != 1 for _, c in poly.terms):
        return False
    return True


def _var_domains(fact: Fact) -> dict[str, DomainKind]:
    return dict(fact.quantified)


# ---------------------------------------------------------------------------
# Moves
# ---------------------------------------------------------------------------

def instantiate(fact: Fact, bindings: Mapping[str, object],
                param_domains: Mapping[str, DomainKind] | None = None,
                provenance: str | None = None) -> Fact:
    """Substitute quantified variables; unbound ones stay quantified."""
    doms = _var_domains(fact)
    for name in bindings:
        if name not in doms:
            raise MoveError(f"cannot bind {name!r}: not a quantified variable")
    table = {k: lift(v) for k, v in bindings.items()}
    # domains of variables introduced by the binding images
    new_doms: dict[str, DomainKind] = {}
    order: list[str] = []
    for name, dom in fact.quantified:
        if name not in table:
            if name not in new_doms:
                new_doms[name] = dom
                order.append(name)
            continue
        for v in sorted(table[name].variables()):
            if v not in new_doms:
                new_doms[v] = doms.get(v, dom) if v not in table else dom
                order.append(v)
    side = set(fact.side_conditions)
    tails = set()
    for name, img in table.items():
        dom = doms[name]
        if not plausibly_in(img, dom):
            raise MoveError(f"image {img!r} of {name!r} lies outside {dom.token}")
        if not evidently_in(img, dom, new_doms, param_domains, fact.codomain):
            from .parse import render
            side.add(SideCondition("in-domain", img, f"{render(img)} in {dom.token}"))
    for name, bound in fact.tail_bounds:
        if name not in table:
            tails.add((name, bound))
            continue
        img = table[name]
        lead = img - img.constant_value()
        atom = lead.as_atom()
        if type(atom) is Var:
            tails.add((atom.name, bound - img.constant_value()))
        else:
            side.add(SideCondition("above-tail", img - bound))
    lhs = substitute(fact.lhs, table)
    rhs = substitute(fact.rhs, table)
    occurring = lhs.variables() | rhs.variables() | {v for v, _ in tails}
    quant = tuple((v, new_doms[v]) for v in order if v in occurring)
    prov = provenance or "instantiate"
    return Fact(lhs, rhs, quant, frozenset(tails), frozenset(side), prov, fact.codomain)


def _merge_quantifiers(*facts: Fact) -> list[tuple]:
    merged: dict[str, DomainKind] = {}
    order = []
    for fc in facts:
        for name, dom in fc.quantified:
            if name in merged:
                if merged[name] is not dom:
                    raise MoveError(f"variable {name!r} has domains {merged[name].token} "
                                    f"and {dom.token}")
            else:
                merged[name] = dom
                order.append((name, dom))
    return order


def subtract(f1: Fact, f2: Fact, provenance: str = "subtract") -> Fact:
    quant = _merge_quantifiers(f1, f2)
    lhs = f1.lhs - f2.lhs
    rhs = f1.rhs - f2.rhs
    tails = f1.tail_bounds | f2.tail_bounds
    occurring = lhs.variables() | rhs.variables() | {v for v, _ in tails}
    return Fact(lhs, rhs, tuple(q for q in quant if q[0] in occurring), tails,
                f1.side_conditions | f2.side_conditions, provenance, f1.codomain)


def shift_difference(fact: Fact, var: str, delta,
                     param_domains: Mapping[str, DomainKind] | None = None) -> Fact:
    """``fact[var -> var + delta] - fact``."""
    shifted = instantiate(fact, {var: Poly.var(var) + lift(delta)}, param_domains)
    return subtract(shifted, fact, provenance="shift_difference")


def add(f1: Fact, f2: Fact, provenance: str = "add") -> Fact:
    quant = _merge_quantifiers(f1, f2)
    tails = f1.tail_bounds | f2.tail_bounds
    return Fact(f1.lhs + f2.lhs, f1.rhs + f2.rhs, tuple(quant), tails,
                f1.side_conditions | f2.side_conditions, provenance, f1.codomain)


def scale(fact: Fact, k, provenance: str = "scale") -> Fact:
    k = Fraction(k)
    if k == 0:
        raise MoveError("scaling by zero")
    return Fact(fact.lhs.scale(k), fact.rhs.scale(k), fact.quantified, fact.tail_bounds,
                fact.side_conditions, provenance, fact.codomain)


def rearrange(fact: Fact, provenance: str = "rearrange") -> Fact:
    """Move everything left: ``lhs - rhs = 0``."""
    return Fact(fact.difference(), Poly(), fact.quantified, fact.tail_bounds,
                fact.side_conditions, provenance, fact.codomain)


# ---------------------------------------------------------------------------
# Matching
# ---------------------------------------------------------------------------

MATCH_PREFIX = "?"


def _is_match_var(a) -> bool:
    return type(a) is Var and a.name.startswith(MATCH_PREFIX)


def _has_match_var(poly: Poly) -> bool:
    return any(v.startswith(MATCH_PREFIX) for v in poly.variables())


def _solo(mono) -> str | None:
    if len(mono) == 1 and mono[0][1] == 1 and _is_match_var(mono[0][0]):
        return mono[0][0].name
    return None


def match(pattern: Poly, target: Poly, binding: dict, domains: Mapping[str, DomainKind]
          ) -> Iterator[dict]:
    """All extensions of ``binding`` making ``pattern`` equal ``target``."""
    pat = substitute(pattern, {k: v for k, v in binding.items()}) if binding else pattern
    if not _has_match_var(pat):
        if pat == target:
            yield binding
        return
    rigid = []
    ground = []
    solos = []
    for m, c in pat.terms:
        name = _solo(m)
        if name is not None:
            solos.append((name, c))
        elif any(_is_match_var(a) or (type(a) is FApp and _has_match_var(a.arg)) for a, _ in m):
            rigid.append((m, c))
        else:
            ground.append((m, c))
    if rigid:
        m, c = rigid[0]
        rest_pat = pat - Poly({m: c})
        for tm, tc in target.terms:
            if tc != c:
                continue
            for b in _match_mono(m, tm, binding, domains):
                yield from match(rest_pat, target - Poly({tm: tc}), b, domains)
        return
    # every ground pattern term must occur verbatim in the target
    remainder = target
    for m, c in ground:
        if target.coeff(m) != c:
            return
        remainder = remainder - Poly({m: c})
    if len(solos) != 1:
        return
    name, k = solos[0]
    image = remainder.scale(1 / k)
    dom = domains.get(name)
    if dom is not None and not plausibly_in(image, dom):
        return
    out = dict(binding)
    out[name] = image
    yield out


def _match_mono(pm, tm, binding, domains) -> Iterator[dict]:
    if len(pm) != len(tm):
        return
    yield from _match_atoms(list(pm), list(tm), binding, domains)


def _match_atoms(patoms, tatoms, binding, domains) -> Iterator[dict]:
    if not patoms:
        yield binding
        return
    (pa, pp), rest = patoms[0], patoms[1:]
    for i, (ta, tp) in enumerate(tatoms):
        if tp != pp:
            continue
        others = tatoms[:i] + tatoms[i + 1:]
        for b in _match_atom(pa, ta, binding, domains):
            yield from _match_atoms(rest, others, b, domains)


def _match_atom(pa, ta, binding, domains) -> Iterator[dict]:
    if _is_match_var(pa):
        img = Poly.atom(ta)
        if pa.name in binding:
            if binding[pa.name] == img:
                yield binding
            return
        dom = domains.get(pa.name)
        if dom is not None and not plausibly_in(img, dom):
            return
        out = dict(binding)
        out[pa.name] = img
        yield out
    elif type(pa) is FApp:
        if type(ta) is FApp:
            yield from match(pa.arg, ta.arg, binding, domains)
    elif pa == ta:
        yield binding


def _rename_rule(rule: Fact) -> tuple[Fact, dict[str, str]]:
    ren = {v: MATCH_PREFIX + v for v in rule.var_names}
    table = {v: Poly.var(n) for v, n in ren.items()}
    quant = tuple((ren[v], d) for v, d in rule.quantified)
    tails = frozenset((ren.get(v, v), b) for v, b in rule.tail_bounds)
    renamed = Fact(substitute(rule.lhs, table), substitute(rule.rhs, table), quant, tails,
                   rule.side_conditions, rule.provenance, rule.codomain)
    return renamed, ren


def replace_atom(poly: Poly, atom, replacement: Poly) -> Poly:
    return map_atoms(poly, lambda a: replacement if a == atom else None)


def rewrite_with(rule, target: Fact, direction: str = LTR,
                 param_domains: Mapping[str, DomainKind] | None = None) -> Fact:
    """Rewrite the first matching f-application of ``target`` using ``rule``."""
    for result in rewrites(rule, target, direction, param_domains):
        return result
    raise NoMatch("rule matches no subterm of the target")


def rewrites(rule, target: Fact, direction: str = LTR,
             param_domains: Mapping[str, DomainKind] | None = None) -> Iterator[Fact]:
    """Every single-step rewrite, in traversal order."""
    if isinstance(rule, ShiftFact):
        rule = rule.to_fact("t")
    if direction not in (LTR, RTL):
        raise MoveError(f"unknown direction {direction!r}")
    renamed, ren = _rename_rule(rule)
    pat_side = renamed.lhs if direction == LTR else renamed.rhs
    atom = pat_side.as_atom()
    if type(atom) is not FApp:
        raise MoveError("rule side must be a single application of f")
    domains = dict(renamed.quantified)
    target_vars = target.occurring_vars() | {v for v, _ in target.quantified}
    seen = set()
    for side in (target.lhs, target.rhs):
        for cand in side.fapps():
            if cand in seen:
                continue
            seen.add(cand)
            for binding in match(atom.arg, cand.arg, {}, domains):
                result = _apply_binding(renamed, ren, binding, cand, target, direction,
                                        target_vars, param_domains)
                if result is not None:
                    yield result


def _apply_binding(renamed: Fact, ren, binding, cand, target: Fact, direction,
                   target_vars, param_domains) -> Fact | None:
    # match variables not fixed by the pattern become fresh quantified variables
    binding = dict(binding)
    for orig, mv in ren.items():
        if mv not in binding and mv in renamed.occurring_vars():
            name = orig
            i = 1
            while name in target_vars:
                name = f"{orig}{i}"
                i += 1
            binding[mv] = Poly.var(name)
    # instantiate with the target's variable domains visible
    dom_ctx = Fact(renamed.lhs, renamed.rhs,
                   renamed.quantified + tuple(q for q in target.quantified
                                              if q[0] not in dict(renamed.quantified)),
                   renamed.tail_bounds, renamed.side_conditions, renamed.provenance,
                   renamed.codomain)
    try:
        inst = instantiate(dom_ctx, binding, param_domains)
    except MoveError:
        return None
    pattern = inst.lhs if direction == LTR else inst.rhs
    replacement = inst.rhs if direction == LTR else inst.lhs
    if pattern != Poly.atom(cand):
        return None
    lhs = replace_atom(target.lhs, cand, replacement)
    rhs = replace_atom(target.rhs, cand, replacement)
    if lhs == rhs or (lhs == target.lhs and rhs == target.rhs):
        return None
    quant = _merge_quantifiers(target, Fact(Poly(), Poly(), tuple(
        q for q in inst.quantified if q[0] not in dict(target.quantified))))
    occurring = lhs.variables() | rhs.variables()
    tails = target.tail_bounds | inst.tail_bounds
    occurring |= {v for v, _ in tails}
    return Fact(lhs, rhs, tuple(q for q in quant if q[0] in occurring), tails,
                target.side_conditions | inst.side_conditions, "rewrite", target.codomain)


# ---------------------------------------------------------------------------
# Shift multiples
# ---------------------------------------------------------------------------

def _multiple_of(arg: Poly, unit_mono) -> tuple[Poly, Poly]:
    """Split ``arg`` into ``N * unit + rest`` where unit is a monomial."""
    unit = dict(unit_mono)
    n_terms: dict = {}
    rest: dict = {}
    for m, c in arg.terms:
        d = dict(m)
        if all(d.get(a, 0) >= p for a, p in unit.items()):
            for a, p in unit.items():
                d[a] -= p
                if d[a] == 0:
                    del d[a]
            key = tuple(sorted(d.items(), key=lambda ap: ap[0].key))
            n_terms[key] = n_terms.get(key, 0) + c
        else:
            rest[m] = c
    return Poly(n_terms), Poly(rest)


def shift_multiple_ok(n: Poly, domain: DomainKind, var_doms, param_doms, codomain) -> bool:
    if n.is_zero():
        return False
    if domain is DomainKind.POSITIVE_INTEGERS:
        return evidently_in(n, domain, var_doms, param_doms, codomain)
    if domain is DomainKind.INTEGERS:
        return evidently_in(n, domain, var_doms, param_doms, codomain)
    return n.is_constant() and n.constant_value().denominator == 1 and n.constant_value() > 0


def shift_rewrite(shift: ShiftFact, target: Fact,
                  param_domains: Mapping[str, DomainKind] | None = None) -> Fact:
    """Rewrite ``f(rest + N*c)`` to ``f(rest) + N*d`` for the first admissible N."""
    for result in shift_rewrites(shift, target, param_domains):
        return result
    raise NoMatch("no multiple of the shift occurs in an f-argument")


def shift_rewrites(shift: ShiftFact, target: Fact,
                   param_domains: Mapping[str, DomainKind] | None = None) -> Iterator[Fact]:
    if shift.parameters or len(shift.shift.terms) != 1:
        return
    unit_mono, unit_c = shift.shift.terms[0]
    if not unit_mono:
        return
    var_doms = dict(target.quantified)
    param_doms = param_domains or {}
    seen = set()
    for side in (target.lhs, target.rhs):
        for cand in side.fapps():
            if cand in seen:
                continue
            seen.add(cand)
            n_poly, rest = _multiple_of(cand.arg, unit_mono)
            n_poly = n_poly.scale(1 / unit_c)
            if not shift_multiple_ok(n_poly, shift.domain, var_doms, param_doms,
                                     target.codomain):
                continue
            side_conds = set()
            if not evidently_in(rest, shift.domain, var_doms, param_doms, target.codomain):
                if not plausibly_in(rest, shift.domain):
                    continue
                from .parse import render
                side_conds.add(SideCondition("in-domain", rest,
                                             f"{render(rest)} in {shift.domain.token}"))
            if shift.tail is not None:
                side_conds.add(SideCondition("above-tail", rest - shift.tail))
            replacement = Poly.f(rest) + n_poly * shift.delta
            lhs = replace_atom(target.lhs, cand, replacement)
            rhs = replace_atom(target.rhs, cand, replacement)
            if lhs == rhs:
                continue
            occurring = lhs.variables() | rhs.variables() | {v for v, _ in target.tail_bounds}
            quant = tuple(q for q in target.quantified if q[0] in occurring)
            yield Fact(lhs, rhs, quant, target.tail_bounds,
                       target.side_conditions | shift.side_conditions | frozenset(side_conds),
                       "shift_rewrite", target.codomain)
