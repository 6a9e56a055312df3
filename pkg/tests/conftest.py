import random
from fractions import Fraction
from pathlib import Path

import pytest

from funceq.core import DomainKind, Fact, evaluate
from funceq.parse import load_problems

CORPUS = Path(__file__).resolve().parents[1] / "src" / "funceq" / "corpus"


def problem(pid: str):
    stem = pid.split("-")[0]
    for p in load_problems(CORPUS / f"{stem}.fe"):
        if p.id == pid:
            return p
    raise KeyError(pid)


@pytest.fixture
def load():
    return problem


def linear(a, b=0):
    a, b = Fraction(a), Fraction(b)
    return lambda q: a * q + b


WITNESSES = {
    "x": linear(1),
    "2x": linear(2),
    "x+1": linear(1, 1),
    "0": linear(0),
    "2016x": linear(2016),
    "-x": linear(-1),
}


def sample(dom: DomainKind, rng: random.Random) -> Fraction:
    if dom is DomainKind.POSITIVE_INTEGERS:
        return Fraction(rng.randint(1, 60))
    if dom is DomainKind.INTEGERS:
        return Fraction(rng.randint(-60, 60))
    q = Fraction(rng.randint(-400, 400), rng.randint(1, 40))
    if dom is DomainKind.POSITIVE_REALS:
        q = abs(q) + Fraction(1, rng.randint(1, 50))
    return q


def param_values(kb, witness, fixed):
    """Values of base parameters under a witness; undefined ones are left out."""
    vals = {k: Fraction(v) for k, v in fixed.items()}
    for name, expr in kb.definitions.items():
        if expr.parameters() <= set(vals):
            vals[name] = evaluate(expr, {}, witness, vals)
    return vals


def applicable(fact: Fact, witness, params) -> bool:
    """A fact claims nothing when one of its nonzero conditions fails."""
    if not (fact.lhs.parameters() | fact.rhs.parameters()) <= set(params):
        return False
    for c in fact.side_conditions:
        if c.kind == "nonzero":
            if not c.expr.parameters() <= set(params) or c.expr.variables():
                return False
            if evaluate(c.expr, {}, witness, params) == 0:
                return False
    return True


def holds_at(fact: Fact, witness, params, rng) -> bool:
    env = {v: sample(d, rng) for v, d in fact.quantified}
    for v in fact.occurring_vars() - set(env):
        env[v] = sample(DomainKind.RATIONALS, rng)
    return evaluate(fact.lhs, env, witness, params) == evaluate(fact.rhs, env, witness, params)
