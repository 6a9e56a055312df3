from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from funceq.core import (FApp, FApply, Fact, Param, Poly, Power, Product, RationalConstant,
                         Sum, Var, Variable, Parameter, power, DomainKind, ShiftFact, equal,
                         evaluate, evaluate_tree, fact_key, normalize, substitute,
                         to_expression)
from funceq.core import ExpansionLimit

x, y, z, c = (Poly.var("x"), Poly.var("y"), Poly.var("z"), Poly.param("c"))
f = Poly.f


def test_binomial_difference():
    assert normalize((x + c) ** 2 - x ** 2) == c.scale(2) * x + c ** 2


def test_cancellation_and_argument_merge():
    assert normalize(f(x) - f(x)).is_zero()
    assert normalize(f(x + y.scale(0)) + f(x).scale(2)) == f(x).scale(3)


def test_tree_normalization():
    tree = Sum((Power(Sum((Variable("x"), Parameter("c"))), 2),
                Product((RationalConstant(-1), Power(Variable("x"), 2)))))
    assert normalize(tree) == c.scale(2) * x + c ** 2


def test_rational_constants_reduced():
    r = RationalConstant(Fraction(3, 6))
    assert r.value == Fraction(1, 2)
    assert Poly.const(Fraction(-4, -8)).constant_value() == Fraction(1, 2)


def test_power_exponent_collapse():
    assert power(Variable("x"), 1) == Variable("x")
    assert power(Variable("x"), 0) == RationalConstant(1)
    with pytest.raises(ValueError):
        Power(Variable("x"), 1)


def test_substitute_examples():
    assert substitute(f(f(x) + y), {"x": f(x) + z}) == f(f(f(x) + z) + y)
    e = x ** 2 + f(y) + 1
    assert substitute(e, {"x": x + c}) == x ** 2 + c.scale(2) * x + c ** 2 + f(y) + 1
    assert substitute(e, {}) == e


def test_equal_examples():
    assert equal(c.scale(2) * x + c ** 2, (x + c) ** 2 - x ** 2)
    assert not equal(f(x) + f(y), f(x + y))
    assert equal(Poly.const(0), Poly())


def test_zero_is_empty():
    assert Poly().terms == ()
    assert (x - x).terms == ()


def test_atom_order_var_param_fapp():
    assert Var("z") < Param("a") < FApp(x)


def test_fact_key_alpha_invariant_and_monic():
    q = (("x", DomainKind.REALS), ("y", DomainKind.REALS))
    a = Fact(f(x + f(y)), x + f(y), q)
    b = Fact(f(y + f(x)).scale(3), (y + f(x)).scale(3), (("y", DomainKind.REALS), ("x", DomainKind.REALS)))
    assert fact_key(a.difference(), a.quantified) == fact_key(b.difference(), b.quantified)


def test_shift_fact_to_fact():
    s = ShiftFact(c, c, None, (), DomainKind.INTEGERS, DomainKind.INTEGERS)
    fact = s.to_fact("t")
    assert fact.lhs == f(Poly.var("t") + c) and fact.rhs == f(Poly.var("t")) + c


def test_expansion_limit():
    with pytest.raises(ExpansionLimit):
        (x + y + f(x)) ** 2015


# --- properties -------------------------------------------------------------

leaves = st.one_of(
    st.sampled_from(["x", "y", "z"]).map(Variable),
    st.sampled_from(["a", "c"]).map(Parameter),
    st.fractions(min_value=-5, max_value=5, max_denominator=4).map(RationalConstant),
)


def _extend(children):
    return st.one_of(
        st.lists(children, min_size=2, max_size=3).map(lambda ts: Sum(tuple(ts))),
        st.lists(children, min_size=2, max_size=3).map(lambda ts: Product(tuple(ts))),
        children.map(FApply),
        st.tuples(children, st.integers(2, 3)).map(lambda t: Power(t[0], t[1])),
    )


trees = st.recursive(leaves, _extend, max_leaves=8)


@settings(max_examples=200, deadline=None)
@given(trees)
def test_normalize_idempotent(t):
    p = normalize(t)
    assert normalize(to_expression(p)) == p


@settings(max_examples=150, deadline=None)
@given(trees, st.fractions(-3, 3, max_denominator=3), st.fractions(-3, 3, max_denominator=3),
       st.fractions(-3, 3, max_denominator=3))
def test_normalize_preserves_value(t, vx, vy, vz):
    env = {"x": vx, "y": vy, "z": vz}
    params = {"a": Fraction(2), "c": Fraction(-1, 3)}
    g = lambda q: 3 * q * q - q + 1
    assert evaluate_tree(t, env, g, params) == evaluate(normalize(t), env, g, params)


@settings(max_examples=150, deadline=None)
@given(trees, trees, trees)
def test_substitution_composes(t, s1, s2):
    e, a, b = normalize(t), normalize(s1), normalize(s2)
    once = substitute(substitute(e, {"x": a}), {"y": b})
    combined = substitute(e, {"x": substitute(a, {"y": b}), "y": b})
    assert once == combined


@settings(max_examples=200, deadline=None)
@given(trees, trees)
def test_addition_commutes_canonically(t1, t2):
    assert normalize(t1) + normalize(t2) == normalize(t2) + normalize(t1)
