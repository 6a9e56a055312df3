import random
import zlib
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from funceq.core import DomainKind, Fact, Poly, ShiftFact
from funceq.parse import parse_expr, render
from funceq.rewrite import (MoveError, NoMatch, RTL, instantiate, rewrite_with,
                            shift_difference, shift_rewrite, subtract)

x, y, z = Poly.var("x"), Poly.var("y"), Poly.var("z")
f = Poly.f


def test_instantiate_p01_origin(load):
    fact = instantiate(load("p01").equation, {"x": 0, "y": 0})
    assert fact.render() == "f(0) + f(f(0)) = 0"


def test_instantiate_iterate(load):
    fact = instantiate(load("intro").equation, {"x": f(x) + z})
    assert fact.lhs == f(y + f(z + f(x)))
    assert fact.rhs == z + f(x) + f(y)
    assert set(fact.var_names) == {"x", "y", "z"}


def test_instantiate_identity(load):
    eq = load("intro").equation
    assert instantiate(eq, {"x": x, "y": y}).key() == eq.key()


def test_instantiate_rejects_unquantified(load):
    with pytest.raises(MoveError):
        instantiate(load("intro").equation, {"w": 1})


def test_instantiate_records_domain_condition(load):
    fact = instantiate(load("p04").equation, {"m": Poly.var("m") - 1})
    assert any(c.kind == "in-domain" for c in fact.side_conditions)


def test_subtract_p05(load):
    eq = load("p05").equation
    s, t = Poly.var("s"), Poly.var("t")
    d = subtract(instantiate(eq, {"x": s}), instantiate(eq, {"x": t}))
    want = (f(f(s) + y) - f(f(t) + y)) - (f(s) - f(t) + (s - t).scale(3))
    assert d.difference() == want


def test_subtract_p14(load):
    eq = load("p14").equation
    a, b = Poly.var("a"), Poly.var("b")
    d = subtract(instantiate(eq, {"x": a}), instantiate(eq, {"x": b}))
    w = f(y).scale(2)
    assert d.difference() == f(a + f(a) + w) - f(b + f(b) + w) - (a - b).scale(2)


def test_subtract_self_is_trivial(load):
    eq = load("intro").equation
    assert subtract(eq, eq).is_trivial()


def test_shift_difference_p09(load):
    eq = load("p09").equation
    c = Poly.param("c")
    d = shift_difference(eq, "x", c)
    assert d.difference() == subtract(instantiate(eq, {"x": x + c}), eq).difference()
    assert f(x ** 2 + c.scale(2) * x + c ** 2 + f(y) + 1) in [Poly({m: 1}) for m, _ in d.difference().terms]


def test_shift_difference_p04_exposes_square(load):
    eq = load("p04").equation
    A = Poly.param("A")
    doms = {"A": DomainKind.POSITIVE_INTEGERS}
    d = shift_difference(eq, "m", A, doms)
    shift = ShiftFact(A, A, None, (), DomainKind.POSITIVE_INTEGERS, DomainKind.POSITIVE_INTEGERS)
    out = shift_rewrite(shift, d, doms)
    out = shift_rewrite(shift, out, doms)
    m = Poly.var("m")
    g = A.scale(2) * f(m) - A.scale(2) * m
    assert out.difference() in (g, -g)
    assert render(out.rhs) == "2*A*f(m) + A^2"


def test_shift_difference_zero_delta(load):
    assert shift_difference(load("p09").equation, "x", 0).is_trivial()


def test_rewrite_intro_second_step(load):
    eq = load("intro").equation
    it = instantiate(eq, {"x": f(x) + z})
    out = rewrite_with(eq, it)
    assert out.lhs == f(x + y + f(z)) and out.rhs == z + f(x) + f(y)


def test_rewrite_with_shift_fact():
    c = Poly.param("c")
    shift = ShiftFact(c, c)
    target = Fact(f(x + c) + f(y), x, (("x", DomainKind.REALS), ("y", DomainKind.REALS)))
    out = rewrite_with(shift, target)
    assert out.lhs == f(x) + c + f(y)


def test_rewrite_no_match(load):
    target = Fact(f(x) + f(y), x, (("x", DomainKind.REALS), ("y", DomainKind.REALS)))
    with pytest.raises(NoMatch):
        rewrite_with(load("intro").equation, target)


def test_rewrite_right_to_left():
    q = (("x", DomainKind.REALS),)
    rule = Fact(f(x) + 1, f(x + 1), q)
    target = Fact(f(y + 1), y, (("y", DomainKind.REALS),))
    out = rewrite_with(rule, target, RTL)
    assert out.lhs == f(y) + 1 and out.rhs == y


def test_tail_bounds_are_kept():
    M = Poly.param("M")
    q = (("x", DomainKind.POSITIVE_REALS), ("y", DomainKind.POSITIVE_REALS))
    fact = Fact(f(x + y), f(x) + f(y), q, frozenset({("x", M)}))
    inst = instantiate(fact, {"y": x})
    assert ("x", M) in inst.tail_bounds
    shifted = instantiate(fact, {"x": x + 1})
    assert ("x", M - 1) in shifted.tail_bounds      # x + 1 > M
    diff = subtract(fact, inst)
    assert fact.tail_bounds <= diff.tail_bounds


# --- model soundness of single moves ------------------------------------------

WITNESS_PROBLEMS = [("intro", Fraction(1), Fraction(0)), ("p20", Fraction(2), Fraction(0)),
                    ("p06", Fraction(1), Fraction(1)), ("p23", Fraction(2016), Fraction(0)),
                    ("p26", Fraction(0), Fraction(0))]

images = st.sampled_from(["0", "1", "-1", "x", "y", "f(x)", "x + 1", "f(y) + x", "2*x", "f(f(x))"])


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(WITNESS_PROBLEMS), images, images)
def test_instantiate_and_subtract_sound(case, img_x, img_y):
    from conftest import problem
    from funceq.core import evaluate
    pid, a, b = case
    eq = problem(pid).equation
    v1, v2 = eq.var_names
    w = lambda q: a * q + b
    bind = {v1: parse_expr(img_x.replace("x", v1).replace("y", v2)),
            v2: parse_expr(img_y.replace("x", v1).replace("y", v2))}
    try:
        inst = instantiate(eq, bind)
    except MoveError:
        return
    diff = subtract(eq, inst)
    rng = random.Random(zlib.crc32(f"{pid}|{img_x}|{img_y}".encode()))
    for fact in (inst, diff):
        for _ in range(10):
            env = {v: Fraction(rng.randint(1, 90), rng.randint(1, 9)) for v in (v1, v2)}
            assert evaluate(fact.lhs, env, w) == evaluate(fact.rhs, env, w)
