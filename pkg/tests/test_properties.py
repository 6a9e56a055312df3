"""Every fact a derivation stores must hold for a known solution of the problem."""
import random
import zlib
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from funceq.core import evaluate
from funceq.search import Deriver

from conftest import WITNESSES, applicable, holds_at, param_values

CASES = [
    ("intro", "x", {}), ("intro", "-x", {}), ("p04", "x", {}), ("p18", "x", {"n": 2}),
    ("p18", "-x", {"n": 0}), ("p19", "x", {}), ("p19", "0", {}), ("p20", "2x", {}),
    ("p20", "0", {}), ("p23", "2016x", {}), ("p06", "x+1", {}), ("p21", "x+1", {}),
    ("p26", "0", {}), ("p26", "x", {}),
]

_bases: dict = {}


def derived_base(pid, load):
    if pid not in _bases:
        d = Deriver(load(pid))
        d.run()
        origin = {}
        for s in d.trace.steps:
            for out in s.output.split(","):
                origin.setdefault(out, s.move)
        _bases[pid] = (d.kb, origin)
    return _bases[pid]


@pytest.mark.parametrize("pid,wname,fixed", CASES, ids=lambda v: str(v))
def test_stored_facts_hold(load, pid, wname, fixed):
    kb, origin = derived_base(pid, load)
    w = WITNESSES[wname]
    params = param_values(kb, w, fixed)
    rng = random.Random(zlib.crc32(f"{pid}/{wname}".encode()))
    facts = [(fid, f) for fid, f in kb.facts.items() if applicable(f, w, params)]
    facts += [(sid, s.to_fact("t")) for sid, s in kb.shifts.items()
              if not s.parameters and applicable(s.to_fact("t"), w, params)]
    assert facts
    per_fact = max(10, 1000 // len(facts) + 1)
    checked = Counter()
    for fid, fact in facts:
        for _ in range(per_fact):
            assert holds_at(fact, w, params, rng), (pid, wname, fid, origin.get(fid), fact.render())
        checked[origin.get(fid, "axiom")] += per_fact
    assert sum(checked.values()) >= 1000


@pytest.mark.parametrize("pid,wname,fixed", [c for c in CASES if c[0] in ("p18", "p19", "p20")],
                         ids=lambda v: str(v))
def test_kfold_facts_hold(load, pid, wname, fixed):
    kb, _ = derived_base(pid, load)
    w = WITNESSES[wname]
    params = param_values(kb, w, fixed)
    rng = random.Random(3)
    for k in kb.kfolds.values():
        for _ in range(200):
            env = {v: Fraction(rng.randint(-20, 20)) for v, _ in k.quantified}
            env.setdefault(k.param_var, Fraction(rng.randint(-20, 20)))
            kk = rng.randint(-4, 4)
            xv = Fraction(rng.randint(-20, 20))
            a = evaluate(k.a_expr, env, w, params)
            b = evaluate(k.b_expr, env, w, params)
            assert w(xv + kk * a) == w(xv) + kk * b


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(CASES), st.integers(0, 2 ** 32 - 1))
def test_random_fact_random_point(load_case, seed):
    from conftest import problem
    pid, wname, fixed = load_case
    kb, _ = derived_base(pid, problem)
    w = WITNESSES[wname]
    params = param_values(kb, w, fixed)
    rng = random.Random(seed)
    facts = [f for f in kb.facts.values() if applicable(f, w, params)]
    fact = facts[rng.randrange(len(facts))]
    assert holds_at(fact, w, params, rng)
