"""Finite-window ground truth for integer-domain problems.

:func:`finite_search` enumerates every assignment of f on a window that
satisfies all in-window instances.  :func:`naive_validate` re-checks an
assignment with a separate evaluator (expression trees, plain product
enumeration), so the two instance filters can be compared.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .core import (DomainKind, FApp, Param, Poly, Var, evaluate, evaluate_tree, lift,
                   substitute_params, to_expression)
from .family import CandidateFamily
from .parse import ProblemSpec

MAX_ASSIGNMENTS = 100_000
MAX_NAIVE_SPACE = 2_000_000


class OracleError(ValueError):
    pass


class _Skip(Exception):
    """An f-argument left the window."""


class _Unknown(Exception):
    def __init__(self, point: int):
        self.point = point


# ---------------------------------------------------------------------------
# Setup shared by the search and the validators
# ---------------------------------------------------------------------------

def _ground_equation(p: ProblemSpec, fixed: Mapping[str, Fraction] | None):
    fixed = dict(fixed or {})
    if p.oracle and not fixed:
        fixed = {k: Fraction(v) for k, v in p.oracle.fixed}
    missing = set(p.param_names) - set(fixed)
    if missing:
        raise OracleError(f"parameters must be fixed for a finite search: {sorted(missing)}")
    eq = p.equation
    lhs = substitute_params(eq.lhs, fixed)
    rhs = substitute_params(eq.rhs, fixed)
    return lhs, rhs, fixed


def _window_points(p: ProblemSpec, window) -> list[int]:
    if p.domain not in (DomainKind.INTEGERS, DomainKind.POSITIVE_INTEGERS):
        raise OracleError(f"finite search needs an integer domain, not {p.domain.token}")
    lo, hi = int(window[0]), int(window[1])
    if p.domain is DomainKind.POSITIVE_INTEGERS and lo < 1:
        raise OracleError("windows over N* must start at 1 or above")
    if lo > hi:
        raise OracleError(f"empty window [{lo}, {hi}]")
    return list(range(lo, hi + 1))


def _value_range(p: ProblemSpec, codomain_range) -> list[int]:
    clo, chi = int(codomain_range[0]), int(codomain_range[1])
    vals = [v for v in range(clo, chi + 1) if p.codomain.contains(v)]
    if not vals:
        raise OracleError(f"empty codomain range [{clo}, {chi}]")
    return vals


@dataclass
class OracleResult:
    problem: str
    window: tuple
    codomain: tuple
    points: tuple
    assignments: list = field(default_factory=list)     # list of tuples, aligned with points
    instances: int = 0
    elapsed: float = 0.0
    truncated: bool = False

    def as_dicts(self) -> list[dict]:
        return [dict(zip(self.points, a)) for a in self.assignments]

    def __len__(self):
        return len(self.assignments)


def _compile(poly: Poly, names: Sequence[str], f):
    """Closure evaluating ``poly`` on a tuple of variable values (ints where possible)."""
    index = {n: i for i, n in enumerate(names)}

    def num(c: Fraction):
        return int(c) if c.denominator == 1 else c

    def build(pl: Poly):
        terms = []
        for m, c in pl.terms:
            factors = []
            for a, pw in m:
                if type(a) is Var:
                    i = index[a.name]
                    factors.append(((lambda env, i=i: env[i]), pw))
                elif type(a) is FApp:
                    inner = build(a.arg)
                    factors.append(((lambda env, g=inner: f(g(env))), pw))
                else:
                    raise OracleError(f"unfixed parameter {a}")
            terms.append((num(c), tuple(factors)))

        def ev(env):
            total = 0
            for c, factors in terms:
                v = c
                for get, pw in factors:
                    v *= get(env) if pw == 1 else get(env) ** pw
                total += v
            return total
        return ev

    return build(poly)


# ---------------------------------------------------------------------------
# Backtracking search
# ---------------------------------------------------------------------------

def finite_search(p: ProblemSpec, window=None, codomain_range=None,
                  fixed: Mapping[str, Fraction] | None = None,
                  limit: int = MAX_ASSIGNMENTS) -> OracleResult:
    """All window assignments satisfying every in-window instance.

    Points are assigned by increasing absolute value, negatives first; an
    instance is checked as soon as every point it touches is assigned.
    """
    start = time.perf_counter()
    if window is None or codomain_range is None:
        if p.oracle is None:
            raise OracleError(f"{p.id} has no oracle window")
        window = window or p.oracle.window
        codomain_range = codomain_range or p.oracle.codomain
    lhs, rhs, fixed = _ground_equation(p, fixed)
    pts = _window_points(p, window)
    vals = _value_range(p, codomain_range)
    order = sorted(pts, key=lambda v: (abs(v), v))
    inwin = set(pts)
    names = p.equation.var_names
    envs = list(itertools.product(pts, repeat=len(names)))
    f_val: dict[int, int] = {}

    def f(q):
        if type(q) is Fraction:
            if q.denominator != 1:
                raise _Skip
            q = int(q)
        if q not in inwin:
            raise _Skip
        if q not in f_val:
            raise _Unknown(q)
        return f_val[q]

    diff = _compile(lhs - rhs, names, f)

    def status(env):
        """True/False for a decided instance, a point for a pending one, None to skip."""
        try:
            return diff(env) == 0
        except _Skip:
            return None
        except _Unknown as u:
            return u.point

    watch: dict[int, list[int]] = {k: [] for k in pts}
    for i, env in enumerate(envs):
        st = status(env)
        if st is False:
            return OracleResult(p.id, tuple(window), tuple(codomain_range), tuple(pts), [],
                                len(envs), time.perf_counter() - start)
        if type(st) is int and not isinstance(st, bool):
            watch[st].append(i)

    found: list[tuple] = []
    truncated = False
    domains: dict[int, list[int]] = {k: list(vals) for k in pts}

    def prune(q: int, idxs: list[int]) -> list[int] | None:
        """Drop values of ``q`` that already falsify one of ``idxs``; None on wipe-out."""
        keep, dropped = [], []
        for w in domains[q]:
            f_val[q] = w
            if any(status(envs[i]) is False for i in idxs):
                dropped.append(w)
            else:
                keep.append(w)
        del f_val[q]
        if not keep:
            return None
        domains[q] = keep
        return dropped

    def assign(depth: int) -> bool:
        nonlocal truncated
        if depth == len(order):
            found.append(tuple(f_val[k] for k in pts))
            if len(found) >= limit:
                truncated = True
                return False
            return True
        point = order[depth]
        for v in domains[point]:
            f_val[point] = v
            moved: list[int] = []
            fresh: dict[int, list[int]] = {}
            ok = True
            for i in watch[point]:
                st = status(envs[i])
                if st is None or st is True:
                    continue
                if st is False:
                    ok = False
                    break
                watch[st].append(i)
                moved.append(st)
                fresh.setdefault(st, []).append(i)
            saved: dict[int, list[int]] = {}
            if ok:
                for q, idxs in fresh.items():
                    before = domains[q]
                    if prune(q, idxs) is None:
                        ok = False
                        break
                    saved[q] = before
            go_on = assign(depth + 1) if ok else True
            for q, before in saved.items():
                domains[q] = before
            for q in reversed(moved):
                watch[q].pop()
            f_val[point] = v
            del f_val[point]
            if not go_on:
                return False
        return True

    assign(0)
    found.sort()
    return OracleResult(p.id, tuple(window), tuple(codomain_range), tuple(pts), found,
                        len(envs), time.perf_counter() - start, truncated)


# ---------------------------------------------------------------------------
# Independent validators
# ---------------------------------------------------------------------------

def naive_validate(p: ProblemSpec, assignment: Mapping[int, int], window=None,
                   fixed: Mapping[str, Fraction] | None = None) -> list[tuple]:
    """Instances violated by ``assignment``; evaluated on expression trees."""
    window = window or (min(assignment), max(assignment))
    lo, hi = int(window[0]), int(window[1])
    table = {Fraction(k): Fraction(v) for k, v in assignment.items()}
    _, _, fixed = _ground_equation(p, fixed)
    lhs = to_expression(p.equation.lhs)
    rhs = to_expression(p.equation.rhs)
    names = p.equation.var_names
    bad = []

    def f(q):
        if q not in table:
            raise LookupError(q)
        return table[q]

    for combo in itertools.product(range(lo, hi + 1), repeat=len(names)):
        env = {n: Fraction(c) for n, c in zip(names, combo)}
        try:
            left = evaluate_tree(lhs, env, f, fixed)
            right = evaluate_tree(rhs, env, f, fixed)
        except LookupError:
            continue
        if left != right:
            bad.append(combo)
    return bad


def naive_enumerate(p: ProblemSpec, window, codomain_range,
                    fixed: Mapping[str, Fraction] | None = None) -> list[tuple]:
    """Every assignment by brute force; only for tiny windows."""
    pts = _window_points(p, window)
    vals = _value_range(p, codomain_range)
    if len(vals) ** len(pts) > MAX_NAIVE_SPACE:
        raise OracleError("window too large for naive enumeration")
    out = []
    for combo in itertools.product(vals, repeat=len(pts)):
        if not naive_validate(p, dict(zip(pts, combo)), window, fixed):
            out.append(combo)
    return sorted(out)


def sample_residual(p: ProblemSpec, closed_form: CandidateFamily,
                    samples: Iterable, params: Mapping[str, Fraction] | None = None) -> Fraction:
    """Largest ``|lhs - rhs|`` over the sample tuples, with f given by ``closed_form``."""
    if closed_form.free_parameters():
        raise OracleError("closed form still has free parameters")
    params = {k: Fraction(v) for k, v in (params or {}).items()}
    names = p.equation.var_names
    worst = Fraction(0)

    def f(q):
        if not p.domain.contains(q):
            raise OracleError(f"f evaluated outside the domain at {q}")
        return closed_form.value(q)

    for sample in samples:
        if isinstance(sample, Mapping):
            env = {k: Fraction(v) for k, v in sample.items()}
        else:
            env = {n: Fraction(v) for n, v in zip(names, sample)}
        for n in names:
            if not p.equation.domain_of(n).contains(env[n]):
                raise OracleError(f"sample {n}={env[n]} lies outside {p.equation.domain_of(n).token}")
        try:
            r = abs(evaluate(p.equation.lhs, env, f, params) - evaluate(p.equation.rhs, env, f, params))
        except ZeroDivisionError:
            raise OracleError("division by zero while evaluating the closed form") from None
        worst = max(worst, r)
    return worst


# ---------------------------------------------------------------------------
# Cross check against a derivation
# ---------------------------------------------------------------------------

@dataclass
class CrossCheckReport:
    problem: str
    expected: list = field(default_factory=list)        # (label, restriction)
    missing: list = field(default_factory=list)         # labels absent from the oracle output
    out_of_range: list = field(default_factory=list)    # labels whose restriction leaves the codomain range
    unexplained: list = field(default_factory=list)     # oracle assignments matching no solution

    @property
    def ok(self) -> bool:
        return not self.missing and bool(self.expected)

    def render(self) -> str:
        lines = [f"cross check {self.problem}: {'ok' if self.ok else 'FAILED'}"]
        for label, _ in self.expected:
            mark = "missing" if label in self.missing else "present"
            lines.append(f"  {label}: {mark}")
        for label in self.out_of_range:
            lines.append(f"  {label}: leaves the codomain range, not checked")
        if self.unexplained:
            lines.append(f"  {len(self.unexplained)} unexplained assignment(s) (window artifacts "
                         f"or missed solutions)")
        return "\n".join(lines)


def solution_families(solutions: Sequence[str]) -> list[tuple[CandidateFamily, list[Poly]]]:
    """Parse outcome strings ``f(x)=FORM [where EQ, ...]``."""
    from .parse import parse_expr, parse_family
    out = []
    for text in solutions:
        body = text.split("=", 1)[1]
        form, _, cond = body.partition(" where ")
        fam = parse_family(form.strip())
        residual = []
        for eq in filter(None, (c.strip() for c in cond.split(","))):
            left, right = eq.split("=")
            names = fam.free_parameters() | {n for n in _idents(eq)}
            residual.append(parse_expr(left, params=names) - parse_expr(right, params=names))
        out.append((fam, residual))
    return out


def _idents(text: str) -> set[str]:
    import re
    return set(re.findall(r"[A-Za-z_][A-Za-z_0-9]*", text))


def concrete_solutions(p: ProblemSpec, fam: CandidateFamily, fixed: Mapping[str, Fraction]
                       ) -> list[CandidateFamily]:
    """Concrete members of a verified family once problem parameters are fixed."""
    from .verify import verify_family
    if fam.is_concrete:
        return [fam]
    cs = verify_family(p, fam, params=dict(fixed))
    out = []
    for br in cs.branches:
        if br.residual:
            continue
        member = cs.family.assign(br.as_dict())
        if member.is_concrete:
            out.append(member)
    return out


def cross_check(trace, oracle_output: OracleResult, p: ProblemSpec, window=None,
                fixed: Mapping[str, Fraction] | None = None) -> CrossCheckReport:
    report = CrossCheckReport(p.id)
    if trace.outcome.status != "Verified":
        report.missing.append("derivation is not Verified")
        return report
    _, _, fixed = _ground_equation(p, fixed)
    pts = oracle_output.points
    clo, chi = oracle_output.codomain
    have = set(oracle_output.assignments)
    explained = set()
    for fam, _ in solution_families(trace.outcome.solutions):
        for member in concrete_solutions(p, fam, fixed):
            label = f"f(x)={member.render().replace(' ', '')}"
            try:
                restr = tuple(member.value(Fraction(k), fixed) for k in pts)
            except ZeroDivisionError:
                report.out_of_range.append(label)
                continue
            if any(v.denominator != 1 or not clo <= v <= chi or not p.codomain.contains(v)
                   for v in restr):
                report.out_of_range.append(label)
                continue
            restr = tuple(int(v) for v in restr)
            report.expected.append((label, restr))
            explained.add(restr)
            if restr not in have:
                report.missing.append(label)
    if not report.expected and not report.missing:
        report.missing.append("no verified solution restricts to the window")
    report.unexplained = sorted(have - explained)
    return report
