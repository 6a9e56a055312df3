"""Acceptance criteria 1-6; each test prints one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` or ``python tests/test_acceptance.py``.
"""
import random
import shutil
import sys
import time
import zlib
from collections import defaultdict
from fractions import Fraction

import pytest

from funceq.cli import expected_outcome, main
from funceq.core import Poly, evaluate
from funceq.family import affine, linear
from funceq.lemmas import bounded_additive_linear, ctl, jensen
from funceq.oracle import cross_check, finite_search, naive_validate
from funceq.parse import parse_expr, parse_family
from funceq.search import DerivationTrace, Deriver, derive
from funceq.verify import check_expectation, verify_concrete, verify_family

from conftest import CORPUS, WITNESSES, applicable, holds_at, param_values, problem

VERIFY_BUDGET = 1.0          # seconds, whole suite
DERIVE_BUDGET = 10.0         # seconds per T1 problem
ORACLE_BUDGET = 60.0         # seconds per oracle run
MOVE_POINTS = 1000
LEMMA_POINTS = 500


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


def P(name):
    return Poly.param(name)


def eqs(*polys):
    return frozenset(p.monic() for p in polys)


# --- 1 -------------------------------------------------------------------------------------

def test_criterion_1_verification(capsys):
    a, b, c, n = P("a"), P("b"), P("c"), P("n")
    cases = [
        ("intro", linear("c"), {eqs(c - 1), eqs(c + 1)}),
        ("p01", linear("c"), {eqs(c ** 2 - 2017)}),
        ("p04", affine(), {eqs(a - 1, b)}),
        ("p06", affine(), {eqs(a - 1, b - 1)}),
        ("p07", parse_family("x + a"), {eqs(a)}),
        ("p18", linear("c"), {eqs(c ** 2 + c - n)}),
        ("p20", linear("a"), {eqs(a), eqs(a - 2)}),
        ("p21", affine(), {eqs(a, b + 1), eqs(a - 1, b - 1)}),
        ("p23", affine(), {eqs(a - 2016, b)}),
        ("p26", parse_family("x + a"), {eqs(a)}),
        ("p27", affine(), {eqs(a - 1, b)}),
        ("p28", parse_family("a/x + b"), {eqs(a - 1, b)}),
    ]
    start = time.perf_counter()
    bad = []
    for pid, fam, want in cases:
        got = verify_family(problem(pid), fam).branch_sets()
        if got != frozenset(want):
            bad.append(f"{pid}: {sorted(map(str, got))}")
    for pid, form in [("p04", "x"), ("p06", "x + 1"), ("p21", "-1"), ("p21", "x + 1"),
                      ("p23", "2016*x"), ("p26", "x"), ("p27", "x"), ("p28", "1/x")]:
        if not verify_concrete(problem(pid), parse_family(form)):
            bad.append(f"{pid}: {form} rejected")
    for pid, *extra in [("intro",), ("p01", "--family", "c*x"), ("p04",), ("p06",),
                        ("p07", "--family", "x + a"), ("p18",), ("p20",), ("p21",), ("p23",),
                        ("p26",), ("p27",), ("p28",)]:
        code = main(["verify", str(CORPUS / f"{pid}.fe"), *extra])
        if code != 0:
            bad.append(f"fe verify {pid} exited {code}")
    out = capsys.readouterr().out
    for text in ("c = 1 | c = -1", "c^2 = 2017", "x + a -> a = 0", "c^2 + c = n",
                 "a = 2 | a = 0"):
        if text not in out:
            bad.append(f"missing {text!r}")
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < VERIFY_BUDGET
    report(capsys, 1, ok, f"{len(cases)} constraint sets exact, {elapsed:.2f}s "
                          f"(limit {VERIFY_BUDGET}s) {'; '.join(bad)}")


# --- 2 -------------------------------------------------------------------------------------

def test_criterion_2_automation(capsys):
    want = {"intro": {"f(x)=x", "f(x)=-x"}, "p04": {"f(x)=x"},
            "p18": {"f(x)=a*x where a^2 + a = n"}, "p19": {"f(x)=0", "f(x)=x", "f(x)=-x"},
            "p20": {"f(x)=2*x", "f(x)=0"}}
    bad, times = [], {}
    for pid, sols in want.items():
        p = problem(pid)
        start = time.perf_counter()
        t = derive(p)
        times[pid] = time.perf_counter() - start
        if t.outcome.status != "Verified" or set(t.outcome.solutions) != sols:
            bad.append(f"{pid}: {t.outcome.text}")
        if times[pid] >= DERIVE_BUDGET:
            bad.append(f"{pid}: {times[pid]:.1f}s")
        if derive(p).dumps() != t.dumps():
            bad.append(f"{pid}: trace not byte-stable")
        if DerivationTrace.loads(t.dumps()).dumps() != t.dumps():
            bad.append(f"{pid}: json round trip")
    slowest = max(times.values())
    report(capsys, 2, not bad, f"5/5 T1 Verified, slowest {slowest:.2f}s "
                               f"(limit {DERIVE_BUDGET}s), traces byte-stable {'; '.join(bad)}")


# --- 3 -------------------------------------------------------------------------------------

def test_criterion_3_oracle(capsys):
    bad, parts = [], []
    for pid, window, codomain in [("p20", (-3, 3), (-6, 6)), ("p21", (-5, 5), (-6, 6))]:
        p = problem(pid)
        start = time.perf_counter()
        result = finite_search(p, window, codomain)
        elapsed = time.perf_counter() - start
        agree = sum(1 for a in result.as_dicts() if not naive_validate(p, a, window))
        trace = derive(p) if p.tier == "T1" else DerivationTrace(p.id, [], expected_outcome(p))
        rep = cross_check(trace, result, p, window)
        if elapsed >= ORACLE_BUDGET:
            bad.append(f"{pid} took {elapsed:.1f}s")
        if not rep.ok or rep.out_of_range:
            bad.append(rep.render())
        if agree != len(result) or result.truncated:
            bad.append(f"{pid}: naive validator agrees on {agree}/{len(result)}")
        parts.append(f"{pid} {len(result)} assignments in {elapsed:.1f}s, "
                     f"{len(rep.expected)} solutions present, naive {agree}/{len(result)}")
    report(capsys, 3, not bad, "; ".join(parts + bad))


# --- 4 -------------------------------------------------------------------------------------

MODEL_CASES = [("intro", "x", {}), ("p04", "x", {}), ("p18", "x", {"n": 2}),
               ("p19", "x", {}), ("p19", "0", {}), ("p20", "2x", {}), ("p20", "0", {}),
               ("p23", "2016x", {}), ("p06", "x+1", {}), ("p21", "x+1", {}), ("p26", "0", {})]


def test_criterion_4_properties(capsys):
    import test_core
    import test_parse
    bad = []
    for prop in (test_core.test_normalize_idempotent, test_parse.test_render_parse_round_trip):
        try:
            prop()
        except AssertionError as exc:
            bad.append(f"{prop.__name__}: {exc}")
    points: dict = defaultdict(int)
    witnesses_per_move: dict = defaultdict(set)
    violations = 0
    for pid, wname, fixed in MODEL_CASES:
        d = Deriver(problem(pid))
        d.run()
        w = WITNESSES[wname]
        params = param_values(d.kb, w, fixed)
        by_move = defaultdict(list)
        for s in d.trace.steps:
            for out in s.output.split(","):
                fact = d.kb.facts.get(out)
                if fact is None and out in d.kb.shifts and not d.kb.shifts[out].parameters:
                    fact = d.kb.shifts[out].to_fact("t")
                if fact is not None and applicable(fact, w, params):
                    by_move[s.move].append(fact)
        rng = random.Random(zlib.crc32(f"{pid}/{wname}".encode()))
        for move, facts in by_move.items():
            for i in range(MOVE_POINTS):
                if not holds_at(facts[i % len(facts)], w, params, rng):
                    violations += 1
            points[move] += MOVE_POINTS
            witnesses_per_move[move].add(wname)
    if violations:
        bad.append(f"{violations} model violations")
    summary = ", ".join(f"{m}:{points[m]}" for m in sorted(points))
    used = sorted({w for ws in witnesses_per_move.values() for w in ws})
    if set(used) < {"x", "2x", "x+1", "0", "2016x"}:
        bad.append(f"witnesses used: {used}")
    report(capsys, 4, not bad, f"normalize/round-trip properties hold; {len(points)} move "
                               f"types checked ({summary}) against {used}, zero violations "
                               f"{'; '.join(bad)}")


# --- 5 -------------------------------------------------------------------------------------

def test_criterion_5_lemmas(capsys):
    from funceq.core import DomainKind, Fact
    RP = DomainKind.POSITIVE_REALS
    q = (("x", RP), ("y", RP))
    rng = random.Random(5)

    def pt():
        return Fraction(rng.randint(1, 900), rng.randint(1, 30))

    names = {"b", "c", "D"}
    p8 = Fact(parse_expr("f(x + y)"), parse_expr("f(x + b) + f(y + c) - D", params=names), q,
              codomain=RP)
    res = ctl(p8, lambda prefix: f"{prefix}1")
    bv, cv = Fraction(3, 2), Fraction(2, 5)
    params = {"b": bv, "c": cv, "D": bv + cv, "s1": bv - cv, "t1": cv}
    ident = WITNESSES["x"]
    outputs = [res.additive] + [s.to_fact("t") for s in res.shifts]
    ctl_bad = 0
    for i in range(LEMMA_POINTS):
        fact = outputs[i % len(outputs)]
        env = {v: pt() for v in fact.var_names}
        if evaluate(fact.lhs, env, ident, params) != evaluate(fact.rhs, env, ident, params):
            ctl_bad += 1
    fam = bounded_additive_linear(res.additive, RP, lambda prefix: f"{prefix}9")
    member = fam.assign({"c9": 1, **{k: params[k] for k in ("D", "s1", "t1")}})
    family_ok = member.render() == "x"

    mid = Fact(parse_expr("f(x) + f(y)"), parse_expr("2*f(1/2*x + 1/2*y)"), q, codomain=RP)
    jfam = jensen(mid)
    jensen_bad = 0
    for av in range(3):
        for bv_ in range(3):
            if av == bv_ == 0:
                continue
            m = jfam.assign({"a": av, "b": bv_})
            for _ in range(LEMMA_POINTS):
                env = {"x": pt(), "y": pt()}
                if evaluate(mid.lhs, env, m.value) != evaluate(mid.rhs, env, m.value):
                    jensen_bad += 1
    ok = ctl_bad == 0 and family_ok and jensen_bad == 0 and jfam.render() == "a*x + b"
    report(capsys, 5, ok, f"ctl outputs {LEMMA_POINTS} points, {ctl_bad} violations, family "
                          f"member {member.render()}; jensen family {jfam.render()}, 8 members x "
                          f"{LEMMA_POINTS} points, {jensen_bad} violations")


# --- 6 -------------------------------------------------------------------------------------

def test_criterion_6_negative_controls(capsys, tmp_path):
    bad = []
    for pid, form in [("p06", "x"), ("p21", "x"), ("p01", "44*x")]:
        if verify_concrete(problem(pid), parse_family(form)):
            bad.append(f"{pid}: {form} accepted")
    p01 = problem("p01")
    exp = p01.expected[0]
    flipped = type(exp)(exp.family, ((P("c") ** 2 + 2017,),), exp.text)
    if check_expectation(p01, flipped)[0]:
        bad.append("p01: c^2 = -2017 accepted")
    mutations = [("p06", "expect f(x) = x + 1", "expect f(x) = x"),
                 ("p21", "expect f(x) = x + 1", "expect f(x) = x"),
                 ("p01", "where c^2 = 2017", "where c^2 = -2017"),
                 ("p01", "expect f(x) = c*x where c^2 = 2017", "expect f(x) = 44*x")]
    codes = []
    for i, (pid, old, new) in enumerate(mutations):
        d = tmp_path / f"m{i}"
        d.mkdir()
        shutil.copy(CORPUS / "intro.fe", d)
        text = (CORPUS / f"{pid}.fe").read_text()
        assert old in text, (pid, old)
        (d / f"{pid}.fe").write_text(text.replace(old, new))
        codes.append(main(["corpus", str(d)]))
    capsys.readouterr()
    if any(c == 0 for c in codes):
        bad.append(f"corpus exit codes {codes}")
    report(capsys, 6, not bad, f"3 concrete mutants and the sign-flipped expectation rejected; "
                               f"mutated corpus runs exit {codes} {'; '.join(bad)}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
