"""Deterministic derivation driver.

Every change to the knowledge base goes through :func:`execute`, which maps
a move name, input ids and string arguments to new objects.  The search
loop and :func:`replay` share that dispatcher, so a recorded trace replays
exactly.

Ids: ``F#`` facts, ``S#`` shifts, ``K#`` k-fold shifts, ``C#`` candidates.
Fresh constants introduced along the way are parameters registered with
their domain (and, for ground abbreviations, their defining expression).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .core import (DomainKind, FApp, Fact, Param, Poly, ShiftFact, Var, substitute,
                   ZERO, substitute_params)
from .family import CandidateFamily, UnsupportedFamily
from .lemmas import (ParamShiftFact, bounded_additive_linear, cancel, common_param_factor,
                     cross_swap, ctl, divide_monomial, iteration_lemma, jensen,
                     kfold_iteration)
from .parse import ProblemSpec, parse_expr, render
from .rewrite import (LTR, MoveError, NoMatch, evidently_in, instantiate, rewrite_with,
                      shift_difference, shift_rewrite)
from .verify import RESIDUAL, SATISFIABLE, verify_family

DEFAULT_BUDGET = (2000, 12)
FRESH_VARS = ("z", "w", "u", "v", "s", "t")
FAMILY_LETTERS = "abcdeghkpqr"
MAX_SCALE_REWRITES = 8


class ReplayError(Exception):
    def __init__(self, index: int, message: str):
        self.index = index
        super().__init__(f"step {index}: {message}")


# ---------------------------------------------------------------------------
# Trace data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Step:
    move: str
    inputs: tuple
    output: str
    side_conditions: tuple = ()
    args: tuple = ()                # ((key, value), ...) strings
    result: str = ""

    def to_json(self) -> dict:
        return {"move": self.move, "inputs": list(self.inputs), "output": self.output,
                "side_conditions": list(self.side_conditions),
                "args": {k: v for k, v in self.args}, "result": self.result}

    @classmethod
    def from_json(cls, d: dict) -> "Step":
        return cls(d["move"], tuple(d["inputs"]), d["output"], tuple(d["side_conditions"]),
                   tuple(d.get("args", {}).items()), d.get("result", ""))


@dataclass(frozen=True)
class Outcome:
    status: str                     # Verified | CandidateUnverified | Exhausted
    solutions: tuple = ()
    assumptions: tuple = ()
    reason: str = ""

    @property
    def text(self) -> str:
        if self.status == "Verified":
            return "Verified: " + " | ".join(self.solutions)
        if self.reason:
            return f"{self.status} ({self.reason})"
        return self.status

    def to_json(self) -> dict:
        return {"status": self.status, "solutions": list(self.solutions),
                "assumptions": list(self.assumptions), "reason": self.reason,
                "text": self.text}

    @classmethod
    def from_json(cls, d: dict) -> "Outcome":
        return cls(d["status"], tuple(d["solutions"]), tuple(d["assumptions"]),
                   d.get("reason", ""))


@dataclass
class DerivationTrace:
    problem: str
    steps: list = field(default_factory=list)
    outcome: Outcome = field(default_factory=lambda: Outcome("Exhausted"))

    def to_json(self) -> dict:
        return {"problem": self.problem, "steps": [s.to_json() for s in self.steps],
                "outcome": self.outcome.to_json()}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def loads(cls, text: str) -> "DerivationTrace":
        d = json.loads(text)
        return cls(d["problem"], [Step.from_json(s) for s in d["steps"]],
                   Outcome.from_json(d["outcome"]))

    def render(self) -> str:
        lines = [f"derivation of {self.problem}"]
        for i, s in enumerate(self.steps, 1):
            ins = ", ".join(s.inputs)
            args = "".join(f" {k}={v}" for k, v in s.args)
            lines.append(f"{i:4d}. {s.move}({ins}){args} -> {s.output}: {s.result}")
            if s.side_conditions:
                lines.append("        assuming " + ", ".join(s.side_conditions))
        lines.append(self.outcome.text)
        if self.outcome.assumptions:
            lines.append("assumptions: " + ", ".join(self.outcome.assumptions))
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Knowledge base
# ---------------------------------------------------------------------------

class KnowledgeBase:
    def __init__(self, problem: ProblemSpec):
        self.problem = problem
        self.facts: dict[str, Fact] = {}
        self.keys: dict[tuple, str] = {}
        self.depth: dict[str, int] = {}
        self.shifts: dict[str, ShiftFact] = {}
        self.kfolds: dict[str, ParamShiftFact] = {}
        self.candidates: dict[str, CandidateFamily] = {}
        self.candidate_source: dict[str, str] = {}
        self.params: dict[str, DomainKind] = {}
        self.definitions: dict[str, Poly] = {}
        self.point_facts: list[str] = []
        self.verdicts: dict[str, str] = {}
        for name, dom in problem.parameters:
            self.params[name] = dom or DomainKind.REALS
        self.add_fact(problem.equation, 0)

    @property
    def axiom(self) -> Fact:
        return self.facts["F1"]

    # -- registration --------------------------------------------------------
    def add_fact(self, fact: Fact, depth: int) -> tuple[str, bool]:
        key = fact.key()
        fid = self.keys.get(key)
        if fid is not None:
            old = self.facts[fid]
            if fact.tail_bounds < old.tail_bounds:
                self.facts[fid] = fact          # the weaker bound wins
            return fid, False
        fid = f"F{len(self.facts) + 1}"
        self.facts[fid] = fact
        self.keys[key] = fid
        self.depth[fid] = depth
        return fid, True

    def add_shift(self, s: ShiftFact) -> tuple[str, bool]:
        sig = (s.shift, s.delta, s.tail, s.parameters)
        for sid, old in self.shifts.items():
            if (old.shift, old.delta, old.tail, old.parameters) == sig:
                return sid, False
        sid = f"S{len(self.shifts) + 1}"
        self.shifts[sid] = s
        return sid, True

    def add_kfold(self, k: ParamShiftFact) -> tuple[str, bool]:
        for kid, old in self.kfolds.items():
            if (old.a_expr, old.b_expr, old.base_var) == (k.a_expr, k.b_expr, k.base_var):
                return kid, False
        kid = f"K{len(self.kfolds) + 1}"
        self.kfolds[kid] = k
        return kid, True

    def add_candidate(self, fam: CandidateFamily, source: str) -> tuple[str, bool]:
        sig = _family_signature(fam)
        for cid, old in self.candidates.items():
            if _family_signature(old) == sig:
                return cid, False
        cid = f"C{len(self.candidates) + 1}"
        self.candidates[cid] = fam
        self.candidate_source[cid] = source
        return cid, True

    def fresh(self, prefix: str) -> str:
        taken = set(self.params) | set(self.problem.variables)
        i = 1
        while f"{prefix}{i}" in taken:
            i += 1
        return f"{prefix}{i}"

    def get(self, ident: str):
        for table in (self.facts, self.shifts, self.kfolds, self.candidates):
            if ident in table:
                return table[ident]
        raise KeyError(ident)

    def infer_domain(self, e: Poly) -> DomainKind:
        cod = self.problem.codomain
        for dom in (DomainKind.POSITIVE_INTEGERS, DomainKind.INTEGERS,
                    DomainKind.POSITIVE_REALS, DomainKind.RATIONALS):
            if evidently_in(e, dom, {}, self.params, cod):
                return dom
        return DomainKind.REALS

    def snapshot(self) -> dict:
        """Comparable rendering of the whole base."""
        return {
            "facts": {k: (v.render(), sorted(c.render() for c in v.side_conditions))
                      for k, v in self.facts.items()},
            "shifts": {k: v.render() for k, v in self.shifts.items()},
            "kfolds": {k: v.render() for k, v in self.kfolds.items()},
            "candidates": {k: str(v) for k, v in self.candidates.items()},
            "params": {k: v.token for k, v in self.params.items()},
            "definitions": {k: render(v) for k, v in self.definitions.items()},
        }


def _family_signature(fam: CandidateFamily) -> tuple:
    """Render after renaming parameters in order of appearance."""
    names = []
    for part in (fam.numerator, fam.denominator):
        for m, _ in part.terms:
            for a, _ in m:
                if type(a) is Param and a.name not in names:
                    names.append(a.name)
    best = None
    for signs in range(1 << len(names)):
        ren = {n: Poly.param(f"_p{i}").scale(-1 if signs >> i & 1 else 1)
               for i, n in enumerate(names)}
        num = substitute_params(fam.numerator, ren)
        den = substitute_params(fam.denominator, ren)
        key = (repr(num.key), repr(den.key))
        if best is None or key < best:
            best = key
    return best


# ---------------------------------------------------------------------------
# Moves
# ---------------------------------------------------------------------------

def _args(**kw) -> tuple:
    return tuple((k, str(v)) for k, v in kw.items())


def _parse(kb: KnowledgeBase, text: str) -> Poly:
    return parse_expr(text, params=set(kb.params))


def _used_letters(kb: KnowledgeBase) -> set[str]:
    return set(kb.params) | set(kb.problem.variables) | {"x"}


def _family_fresh(kb: KnowledgeBase):
    used = set(_used_letters(kb))

    def fresh(prefix: str) -> str:
        for ch in [prefix] + list(FAMILY_LETTERS):
            if ch not in used:
                used.add(ch)
                return ch
        i = 1
        while f"{prefix}{i}" in used:
            i += 1
        used.add(f"{prefix}{i}")
        return f"{prefix}{i}"

    return fresh


def execute(kb: KnowledgeBase, move: str, inputs: tuple, args: Mapping[str, str]
            ) -> list[tuple[str, object]]:
    """Run one move; returns ``[(kind, object), ...]`` without registering them."""
    a = dict(args)
    get = kb.get
    if move == "instantiate":
        fact = get(inputs[0])
        bindings = {k[2:]: _parse(kb, v) for k, v in a.items() if k.startswith("b:")}
        return [("fact", instantiate(fact, bindings, kb.params))]
    if move == "define":
        value = _parse(kb, a["value"])
        return [("param", (a["name"], DomainKind.from_token(a["domain"]), value))]
    if move == "point_value":
        fact = get(inputs[0])
        name = a["name"]
        point = _ground_point(fact)
        if point is None:
            raise MoveError("not a ground point value")
        arg, value = point
        dom = kb.problem.domain
        pfact = Fact(Poly.f(Poly.param(name)), value, (), frozenset(), fact.side_conditions,
                     "point_value", fact.codomain)
        return [("param", (name, dom, arg)), ("fact", pfact)]
    if move == "iteration_lemma":
        fact = get(inputs[0])
        s = iteration_lemma(fact, kb.params)
        if s is None:
            raise MoveError("iteration lemma does not apply")
        out = []
        if (not s.parameters and not s.shift.is_constant()
                and type(s.shift.as_atom()) is not Param):
            name = a["name"]
            dom = kb.infer_domain(s.shift)
            out.append(("param", (name, dom, s.shift)))
            p = Poly.param(name)
            s = ShiftFact(p, p, s.tail, (), s.domain, s.codomain, s.side_conditions,
                          s.provenance)
        out.append(("shift", s))
        return out
    if move == "shift_difference":
        fact, shift = get(inputs[0]), get(inputs[1])
        return [("fact", shift_difference(fact, a["var"], shift.shift, kb.params))]
    if move == "rewrite_with":
        rule, target = get(inputs[0]), get(inputs[1])
        return [("fact", rewrite_with(rule, target, a.get("direction", LTR), kb.params))]
    if move == "shift_rewrite":
        shift, target = get(inputs[0]), get(inputs[1])
        return [("fact", shift_rewrite(shift, target, kb.params))]
    if move == "kfold_iteration":
        k = kfold_iteration(get(inputs[0]))
        if k is None:
            raise MoveError("k-fold iteration does not apply")
        return [("kfold", k)]
    if move == "cross_swap":
        return [("fact", cross_swap(get(inputs[0]), a.get("var")))]
    if move == "cancel":
        out = cancel(get(inputs[0]), kb.params)
        if out is None:
            raise MoveError("no common factor")
        return [("fact", out)]
    if move == "ctl":
        names = iter(a["names"].split(",")) if a.get("names") else iter(())
        res = ctl(get(inputs[0]), lambda prefix: next(names))
        if res is None:
            raise MoveError("Cauchy-type lemma does not apply")
        out = [("param", (n, DomainKind.REALS, None)) for n in res.fresh]
        out += [("shift", s) for s in res.shifts]
        out.append(("fact", res.additive))
        return out
    if move == "scale_instantiate":
        base, scaling = get(inputs[0]), get(inputs[1])
        k = Fraction(a["factor"])
        fact = instantiate(base, {v: Poly.var(v).scale(k) for v in base.var_names}, kb.params)
        for _ in range(MAX_SCALE_REWRITES):
            try:
                fact = rewrite_with(scaling, fact, LTR, kb.params)
            except MoveError:
                break
        fact = Fact(fact.lhs, fact.rhs, fact.quantified, fact.tail_bounds,
                    fact.side_conditions, "scale_instantiate", fact.codomain)
        return [("fact", fact)]
    if move == "extract":
        fact = get(inputs[0])
        return [("candidate", c) for c in extract_candidates(fact, kb)]
    if move == "bounded_additive_linear":
        fact = get(inputs[0])
        fam = bounded_additive_linear(fact, kb.problem.codomain, _family_fresh(kb))
        if fam is None:
            raise MoveError("not a bounded additive fact")
        return [("candidate", fam)]
    if move == "jensen":
        fam = jensen(get(inputs[0]), _family_fresh(kb))
        if fam is None:
            raise MoveError("not a Jensen fact")
        return [("candidate", fam)]
    if move == "verify":
        fam = get(inputs[0])
        cs = verify_family(kb.problem, fam)
        return [("verdict", (inputs[0], cs))]
    raise MoveError(f"unknown move {move!r}")


def _ground_point(fact: Fact):
    """``(arg, value)`` when the fact reads ``f(arg) = value`` with both sides ground."""
    if fact.occurring_vars():
        return None
    for lhs, rhs in ((fact.lhs, fact.rhs), (fact.rhs, fact.lhs)):
        atom = lhs.as_atom()
        if type(atom) is FApp and not rhs.has_f() and atom.arg.has_f():
            return atom.arg, rhs
    return None


def extract_candidates(fact: Fact, kb: KnowledgeBase) -> list[CandidateFamily]:
    """Solve a one-variable fact for ``f(v)`` as a polynomial in ``v``."""
    vs = fact.occurring_vars()
    if len(vs) != 1 or fact.tail_bounds:
        return []
    (v,) = vs
    fv = FApp(Poly.var(v))
    fresh = _family_fresh(kb)
    ground: dict = {}
    diff = ZERO
    for m, c in fact.difference().terms:
        term = Poly.const(c)
        for atom, p in m:
            if type(atom) is FApp and atom != fv:
                if atom.arg.variables():
                    return []
                if atom not in ground:
                    ground[atom] = Poly.param(fresh("a"))
                term = term * ground[atom] ** p
            else:
                term = term * Poly.atom(atom) ** p
        diff = diff + term
    coeffs = diff.collect(fv)
    if not coeffs or max(coeffs) == 0:
        return []
    if any(c.has_f() for c in coeffs.values()):
        return []
    low = min(coeffs)
    roots: list[Poly] = []
    side = set()
    if low > 0:
        roots.append(ZERO)
    top = max(coeffs) - low
    if top == 1:
        c0, c1 = coeffs.get(low, ZERO), coeffs[low + 1]
        if c1.variables():
            pass
        else:
            mono = common_param_factor(c1) if not c1.is_constant() else ()
            rest = divide_monomial(c1, mono) if mono else c1
            if rest.is_constant():
                try:
                    num = divide_monomial(c0, mono) if mono else c0
                except ValueError:
                    num = None
                if num is not None:
                    roots.append(num.scale(-1 / rest.constant_value()))
                    if mono and not all(kb.params.get(a.name, DomainKind.REALS).positive
                                        for a, _ in mono):
                        back = {a.as_atom().name: Poly.atom(at) for at, a in ground.items()}
                        side.add(render(substitute_params(Poly({mono: 1}), back)))
    out = []
    x = Poly.var("x")
    for r in roots:
        poly = substitute(r, {v: x})
        try:
            fam = CandidateFamily.polynomial(poly, note="extract")
        except UnsupportedFamily:
            continue
        if side:
            fam = CandidateFamily(fam.numerator, fam.denominator, fam.parameters,
                                  fam.validity, fam.sign_constraints,
                                  "extract; nonzero " + ", ".join(sorted(side)))
        out.append(fam)
    return out


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------

class Deriver:
    def __init__(self, problem: ProblemSpec, budget=DEFAULT_BUDGET):
        self.p = problem
        self.max_facts, self.max_depth = budget
        self.kb = KnowledgeBase(problem)
        self.trace = DerivationTrace(problem.id)
        self.confirmed: list[tuple[str, object]] = []
        self.out_of_budget = False
        self._done_shifts: set[str] = set()
        self._tried: set = set()
        self.stop_reason = "max_depth"

    # -- step application ----------------------------------------------------
    def apply(self, move: str, inputs: tuple, args: tuple = (), depth: int = 0) -> list[str]:
        """Execute a move; record it when it adds something.  Returns new ids."""
        sig = (move, inputs, args)
        if sig in self._tried:
            return []
        self._tried.add(sig)
        if len(self.kb.facts) >= self.max_facts:
            self.out_of_budget = True
            return []
        try:
            produced = execute(self.kb, move, inputs, dict(args))
        except (MoveError, UnsupportedFamily, ValueError, ZeroDivisionError):
            return []
        ids, new_ids, fresh_any = register(self.kb, produced, depth, inputs)
        if not fresh_any:
            return []
        step = make_step(self.kb, move, inputs, args, ids, produced)
        self.trace.steps.append(step)
        return new_ids

    def fact_depth(self, fid: str) -> int:
        return self.kb.depth.get(fid, 0)

    # -- tactic schedule -------------------------------------------------------
    def run(self) -> DerivationTrace:
        frontier = ["F1"]
        new_shifts: list[str] = []
        for rnd in range(1, self.max_depth + 1):
            added: list[str] = []
            shifts_now: list[str] = []

            def take(ids):
                for i in ids:
                    if i.startswith("F"):
                        added.append(i)
                    elif i.startswith("S"):
                        shifts_now.append(i)

            for fid in frontier:
                take(self.pool_moves(fid, rnd))
            for fid in frontier:
                take(self.iteration_moves(fid, rnd))
            for fid in frontier:
                take(self.rewrite_moves(fid, rnd))
            for sid in new_shifts + shifts_now:
                take(self.shift_difference_moves(sid, rnd))
            for fid in frontier:
                take(self.lemma_moves(fid, rnd))
            for fid in list(dict.fromkeys(frontier + added)):
                self.candidate_moves(fid)
            if self.out_of_budget:
                self.stop_reason = "max_facts"
            if self.confirmed or self.out_of_budget:
                break
            frontier = list(dict.fromkeys(added))
            new_shifts = [s for s in shifts_now if s not in self._done_shifts]
            if not frontier and not new_shifts:
                self.stop_reason = "saturated"
                break
        self.trace.outcome = self.outcome()
        return self.trace

    def pool_moves(self, fid: str, depth: int) -> list[str]:
        kb = self.kb
        fact = kb.facts[fid]
        out: list[str] = []
        point = _ground_point(fact)
        if point is not None:
            out += self.point_moves(fid, depth)
        if fid != "F1" and fact.provenance not in ("cross_swap", "scale_instantiate"):
            out += self.zero_moves(fid, depth)
            return out
        names = [v for v in fact.var_names if v in fact.occurring_vars()]
        for v in names:
            for g in fact.domain_of(v).ground_pool():
                out += self.apply("instantiate", (fid,), _args(**{f"b:{v}": g}), depth)
        for i, v in enumerate(names):
            for w in names[i + 1:]:
                out += self.apply("instantiate", (fid,),
                                  _args(**{f"b:{v}": w, f"b:{w}": v}), depth)
        for i, v in enumerate(names):
            for w in names[i + 1:]:
                out += self.apply("instantiate", (fid,), _args(**{f"b:{w}": v}), depth)
        if fid == "F1":
            used = set(names)
            z = next(n for n in FRESH_VARS if n not in used)
            for v in names:
                out += self.apply("instantiate", (fid,), _args(**{f"b:{v}": f"f({v}) + {z}"}),
                                  depth)
        out += self.zero_moves(fid, depth)
        return out

    def zero_moves(self, fid: str, depth: int) -> list[str]:
        """Instantiate a one-variable fact where the coefficient of f(v) vanishes."""
        fact = self.kb.facts[fid]
        vs = fact.occurring_vars()
        if len(vs) != 1:
            return []
        (v,) = vs
        c1 = fact.difference().collect(FApp(Poly.var(v))).get(1)
        if c1 is None or c1.has_f() or c1.parameters() or c1.is_constant():
            return []
        from .verify import rational_roots
        co = {k: c.constant_value() for k, c in c1.collect(Var(v)).items()}
        roots, _ = rational_roots(co)
        out = []
        for r in dict.fromkeys(roots):
            if fact.domain_of(v).contains(r):
                out += self.apply("instantiate", (fid,), _args(**{f"b:{v}": r}), depth)
        return out

    def point_moves(self, fid: str, depth: int) -> list[str]:
        kb = self.kb
        name = kb.fresh("u")
        ids = self.apply("point_value", (fid,), _args(name=name), depth)
        pfacts = [i for i in ids if i.startswith("F")]
        if not pfacts:
            return ids
        pid = pfacts[0]
        kb.point_facts.append(pid)
        out = list(ids)
        axiom = kb.axiom
        for v in axiom.var_names:
            inst = self.apply("instantiate", ("F1",), _args(**{f"b:{v}": name}), depth)
            out += inst
            for i in inst:
                out += self.apply("rewrite_with", (pid, i), _args(direction=LTR), depth)
        return out

    def iteration_moves(self, fid: str, depth: int) -> list[str]:
        return self.apply("iteration_lemma", (fid,), _args(name=self.kb.fresh("A")), depth)

    def rewrite_moves(self, fid: str, depth: int) -> list[str]:
        if fid == "F1":
            return []
        kb = self.kb
        out = []
        rules = []
        if kb.axiom.lhs.as_atom() is not None and type(kb.axiom.lhs.as_atom()) is FApp:
            rules.append("F1")
        rules += kb.point_facts
        for rid in rules:
            out += self.apply("rewrite_with", (rid, fid), _args(direction=LTR), depth)
        for sid, s in kb.shifts.items():
            if s.parameters:
                out += self.apply("rewrite_with", (sid, fid), _args(direction=LTR), depth)
            else:
                out += self.apply("shift_rewrite", (sid, fid), (), depth)
        return out

    def shift_difference_moves(self, sid: str, depth: int) -> list[str]:
        self._done_shifts.add(sid)
        s = self.kb.shifts[sid]
        if s.parameters or s.shift.variables():
            return []
        out = []
        for v in self.kb.axiom.var_names:
            out += self.apply("shift_difference", ("F1", sid), _args(var=v), depth)
        return out

    def lemma_moves(self, fid: str, depth: int) -> list[str]:
        kb = self.kb
        out = []
        out += self.apply("ctl", (fid,), _args(names=self._ctl_names(fid)), depth)
        kids = self.apply("kfold_iteration", (fid,), (), depth)
        for kid in kids:
            out += self.apply("cross_swap", (kid,), (), depth)
        out += self.apply("cancel", (fid,), (), depth)
        k = _scaling_factor(kb.facts[fid])
        if k is not None:
            out += self.apply("scale_instantiate", ("F1", fid), _args(factor=k), depth)
        return out

    def _ctl_names(self, fid: str) -> str:
        from .lemmas import _ctl_parts
        fact = self.kb.facts[fid]
        for x, y, u, v, w in _ctl_parts(fact):
            names = []
            taken = set(self.kb.params)

            def fresh(prefix):
                i = 1
                while f"{prefix}{i}" in taken:
                    i += 1
                taken.add(f"{prefix}{i}")
                return f"{prefix}{i}"
            dom = fact.domain_of(x)
            if fact.tail_bounds or dom.positive:
                names.append(fresh("M"))
            if u != v:
                names.append(fresh("s"))
            if not v.is_zero():
                names.append(fresh("t"))
            return ",".join(names)
        return ""

    def candidate_moves(self, fid: str) -> None:
        for move in ("extract", "bounded_additive_linear", "jensen"):
            for cid in self.apply(move, (fid,), (), self.fact_depth(fid)):
                self.verify_candidate(cid)

    def verify_candidate(self, cid: str) -> None:
        before = len(self.trace.steps)
        self.apply("verify", (cid,), (), 0)
        if len(self.trace.steps) == before:
            return
        cs = self.kb.verdicts.get(cid)
        if cs is not None and cs.status in (SATISFIABLE, RESIDUAL):
            self.confirmed.append((cid, cs))

    # -- outcome ---------------------------------------------------------------
    def outcome(self) -> Outcome:
        if self.confirmed:
            sols: list[str] = []
            assumptions: list[str] = []
            for cid, cs in self.confirmed:
                for text in solution_texts(cs):
                    if text not in sols:
                        sols.append(text)
                src = self.kb.candidate_source.get(cid)
                if src in self.kb.facts:
                    for c in sorted(self.kb.facts[src].side_conditions):
                        if c.render() not in assumptions:
                            assumptions.append(c.render())
                fam = self.kb.candidates[cid]
                if "nonzero" in fam.note:
                    for part in fam.note.split("nonzero ", 1)[1].split(", "):
                        tag = f"nonzero({part})"
                        if tag not in assumptions:
                            assumptions.append(tag)
            return Outcome("Verified", tuple(sols), tuple(assumptions))
        if self.kb.candidates:
            return Outcome("CandidateUnverified", reason=f"{len(self.kb.candidates)} candidates")
        return Outcome("Exhausted", reason=self.stop_reason)


def _scaling_factor(fact: Fact) -> Fraction | None:
    """``k`` when the fact reads ``f(k*t) = d*f(t)`` with constant ``k`` and ``d``."""
    vs = fact.occurring_vars()
    if len(vs) != 1:
        return None
    (t,) = vs
    diff = fact.difference()
    if len(diff.terms) != 2:
        return None
    ft = ((FApp(Poly.var(t)), 1),)
    if diff.coeff(ft) == 0:
        return None
    other = [m for m, _ in diff.terms if m != ft]
    if len(other) != 1 or len(other[0]) != 1 or type(other[0][0][0]) is not FApp:
        return None
    arg = other[0][0][0].arg
    if len(arg.terms) != 1 or arg.terms[0][0] != ((Var(t), 1),):
        return None
    k = arg.terms[0][1]
    if k in (0, 1):
        return None
    return k


def solution_texts(cs) -> list[str]:
    out = []
    for br in cs.branches:
        fam = cs.family.assign(br.as_dict()) if br.assignment else cs.family
        text = f"f(x)={fam.render().replace(' ', '')}"
        if br.residual:
            from .parse import render_equation
            text += " where " + ", ".join(render_equation(r) for r in br.residual)
        out.append(text)
    return out


# ---------------------------------------------------------------------------
# Registration shared by search and replay
# ---------------------------------------------------------------------------

def register(kb: KnowledgeBase, produced, depth: int, inputs: tuple):
    ids: list[str] = []
    new_ids: list[str] = []
    fresh_any = False
    parent_depth = max((kb.depth.get(i, 0) for i in inputs), default=0)
    for kind, obj in produced:
        if kind == "param":
            name, dom, value = obj
            if name not in kb.params:
                kb.params[name] = dom
                if value is not None:
                    kb.definitions[name] = value
                fresh_any = True
            ids.append(name)
        elif kind == "fact":
            if obj.is_trivial():
                continue
            fid, new = kb.add_fact(obj, parent_depth + 1)
            ids.append(fid)
            if new:
                new_ids.append(fid)
                fresh_any = True
        elif kind == "shift":
            sid, new = kb.add_shift(obj)
            ids.append(sid)
            if new:
                new_ids.append(sid)
                fresh_any = True
        elif kind == "kfold":
            kid, new = kb.add_kfold(obj)
            ids.append(kid)
            if new:
                new_ids.append(kid)
                fresh_any = True
        elif kind == "candidate":
            cid, new = kb.add_candidate(obj, inputs[0] if inputs else "")
            ids.append(cid)
            if new:
                new_ids.append(cid)
                fresh_any = True
        elif kind == "verdict":
            cid, cs = obj
            if cid not in kb.verdicts:
                kb.verdicts[cid] = cs
                fresh_any = True
            ids.append(cid)
    return ids, new_ids, fresh_any


def _describe(kb: KnowledgeBase, kind: str, obj) -> str:
    if kind == "param":
        name, dom, value = obj
        return f"{name} := {render(value)}" if value is not None else f"{name} in {dom.token}"
    if kind == "fact":
        return obj.render()
    if kind in ("shift", "kfold"):
        return obj.render()
    if kind == "candidate":
        return str(obj)
    if kind == "verdict":
        return f"{obj[1].status}: {obj[1].render()}"
    return repr(obj)


def make_step(kb: KnowledgeBase, move: str, inputs: tuple, args: tuple, ids: list[str],
              produced) -> Step:
    side = []
    for kind, obj in produced:
        conds = getattr(obj, "side_conditions", None)
        if isinstance(conds, frozenset):
            for c in sorted(conds):
                r = c.render()
                if r not in side:
                    side.append(r)
    result = "; ".join(_describe(kb, k, o) for k, o in produced if not (k == "fact" and o.is_trivial()))
    return Step(move, tuple(inputs), ",".join(ids), tuple(side), tuple(args), result)


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def derive(p: ProblemSpec, budget=DEFAULT_BUDGET) -> DerivationTrace:
    return Deriver(p, tuple(budget)).run()


def replay(trace: DerivationTrace, p: ProblemSpec) -> KnowledgeBase:
    """Re-execute every step against a fresh base; raise on the first divergence."""
    kb = KnowledgeBase(p)
    if trace.problem != p.id:
        raise ReplayError(0, f"trace is for {trace.problem!r}, not {p.id!r}")
    for i, step in enumerate(trace.steps, 1):
        try:
            produced = execute(kb, step.move, step.inputs, dict(step.args))
        except (MoveError, KeyError, UnsupportedFamily, ValueError) as exc:
            raise ReplayError(i, f"{step.move} failed: {exc}") from None
        ids, _, _ = register(kb, produced, 0, step.inputs)
        redo = make_step(kb, step.move, step.inputs, step.args, ids, produced)
        if redo.output != step.output or redo.result != step.result:
            raise ReplayError(i, f"{step.move} produced {redo.output} "
                                 f"'{redo.result}', trace has {step.output} '{step.result}'")
    return kb
