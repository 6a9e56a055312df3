import pytest

from funceq.core import DomainKind, Fact, Poly
from funceq.parse import parse_problem, render_problem
from funceq.search import (DerivationTrace, Deriver, KnowledgeBase, ReplayError, derive, replay)

T1 = ["intro", "p04", "p18", "p19", "p20"]


def moves(trace):
    return [s.move for s in trace.steps]


def test_derive_intro(load):
    t = derive(load("intro"))
    assert t.outcome.text == "Verified: f(x)=x | f(x)=-x"
    ms = moves(t)
    for m in ("instantiate", "rewrite_with", "bounded_additive_linear", "verify"):
        assert m in ms
    assert ms.index("rewrite_with") < ms.index("bounded_additive_linear") < ms.index("verify")
    assert t.outcome.assumptions == ()


def test_derive_p04(load):
    t = derive(load("p04"))
    assert t.outcome.text == "Verified: f(x)=x"
    ms = moves(t)
    assert ms.index("iteration_lemma") < ms.index("shift_difference") < ms.index("extract")
    assert any("A1 := f(1)^2 + 1" in s.result for s in t.steps if s.move == "iteration_lemma")


def test_derive_p20(load):
    t = derive(load("p20"))
    assert t.outcome.text == "Verified: f(x)=2*x | f(x)=0"
    ms = moves(t)
    assert ms.index("kfold_iteration") < ms.index("cross_swap") < ms.index("extract")


def test_derive_p18_keeps_condition(load):
    t = derive(load("p18"))
    assert t.outcome.solutions == ("f(x)=a*x where a^2 + a = n",)
    assert "nonzero(n)" in t.outcome.assumptions


def test_derive_p19(load):
    t = derive(load("p19"))
    assert set(t.outcome.solutions) == {"f(x)=0", "f(x)=x", "f(x)=-x"}


@pytest.mark.parametrize("pid", T1)
def test_determinism(load, pid):
    assert derive(load(pid)).dumps() == derive(load(pid)).dumps()


@pytest.mark.parametrize("pid", T1)
def test_json_round_trip(load, pid):
    t = derive(load(pid))
    again = DerivationTrace.loads(t.dumps())
    assert again.dumps() == t.dumps()
    assert again.outcome == t.outcome


@pytest.mark.parametrize("pid", T1)
def test_replay_reproduces_base(load, pid):
    d = Deriver(load(pid))
    trace = d.run()
    assert replay(trace, load(pid)).snapshot() == d.kb.snapshot()


def test_replay_edited_problem_fails(load):
    p = load("intro")
    trace = derive(p)
    edited = parse_problem(render_problem(p).replace("x + f(y)", "x + 2*f(y)"))
    assert edited.id == p.id
    with pytest.raises(ReplayError) as err:
        replay(trace, edited)
    assert err.value.index >= 1


def test_replay_wrong_problem_id(load):
    with pytest.raises(ReplayError):
        replay(derive(load("p20")), load("p04"))


def test_replay_empty_trace(load):
    p = load("intro")
    kb = replay(DerivationTrace(p.id), p)
    assert list(kb.facts) == ["F1"] and kb.axiom.key() == p.equation.key()
    assert not kb.shifts and not kb.candidates


def test_trace_ids_are_defined_before_use(load):
    for pid in T1:
        t = derive(load(pid))
        seen = {"F1"}
        for s in t.steps:
            assert set(s.inputs) <= seen, (pid, s)
            if s.output:
                seen.update(s.output.split(","))


def test_weaker_bound_wins(load):
    kb = KnowledgeBase(load("intro"))
    x, y = Poly.var("x"), Poly.var("y")
    q = (("x", DomainKind.POSITIVE_REALS), ("y", DomainKind.POSITIVE_REALS))
    M = Poly.param("M")
    bounded = Fact(Poly.f(x + y), Poly.f(x) + Poly.f(y), q, frozenset({("x", M), ("y", M)}))
    fid, new = kb.add_fact(bounded, 1)
    assert new
    half = Fact(bounded.lhs, bounded.rhs, q, frozenset({("x", M)}))
    assert kb.add_fact(half, 2) == (fid, False)
    assert kb.facts[fid].tail_bounds == half.tail_bounds
    # a stronger-bounded duplicate never replaces the stored one
    assert kb.add_fact(bounded, 3) == (fid, False)
    assert kb.facts[fid].tail_bounds == half.tail_bounds
    free = Fact(bounded.lhs, bounded.rhs, q)
    kb.add_fact(free, 3)
    assert kb.facts[fid].tail_bounds == frozenset()


def test_fact_set_only_grows(load):
    d = Deriver(load("intro"))
    d.run()
    ids = list(d.kb.facts)
    assert ids == [f"F{i}" for i in range(1, len(ids) + 1)]


def test_budget_exhaustion(load):
    t = derive(load("intro"), (2, 1))
    assert t.outcome.status == "Exhausted" and t.outcome.reason == "max_facts"
    assert t.outcome.text == "Exhausted (max_facts)"


def test_saturation_on_unreachable_problem(load):
    t = derive(load("p02"))
    assert t.outcome.status in ("Exhausted", "CandidateUnverified")


@pytest.mark.parametrize("pid", T1)
def test_assumptions_cover_side_conditions(load, pid):
    d = Deriver(load(pid))
    t = d.run()
    assert t.outcome.status == "Verified"
    for cid, _ in d.confirmed:
        src = d.kb.candidate_source.get(cid)
        if src in d.kb.facts:
            for c in d.kb.facts[src].side_conditions:
                assert c.render() in t.outcome.assumptions


def test_render_lists_steps(load):
    text = derive(load("p20")).render()
    assert text.splitlines()[0] == "derivation of p20"
    assert text.splitlines()[-1] == "Verified: f(x)=2*x | f(x)=0"
