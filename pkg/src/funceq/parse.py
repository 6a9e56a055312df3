"""Problem-file DSL: tokenizer, recursive-descent parser, canonical printer.

A problem file holds one or more blocks::

    # comment
    problem "intro" {
      domain: Q -> Q
      tier: T1
      forall x y : f(f(x) + y) = x + f(y)
      expect f(x) = c*x where c = 1 | c = -1
    }

Headers: ``domain: DOM -> DOM``, ``param NAME : DOM``, ``tier: T1|T2|T3`` and
``oracle: LO:HI -> CLO:CHI [with n=2, ...]`` (finite-window metadata for
integer-domain problems).  In ``expect`` blocks, ``where`` takes
comma-separated equations, ``|`` separates alternative branches, and the
keyword ``unsat`` states that the family admits no solution.  Family
closed forms may divide by ``x`` (``a/x + b``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .core import (ONE, DomainKind, Expression, FApply, Fact, Parameter, Poly,
                   Product, RationalConstant, Sum, Variable, lift, normalize, power)

KEYWORDS = {"problem", "forall", "expect", "where", "param", "domain", "tier",
            "unsat", "oracle", "with"}
TIERS = ("T1", "T2", "T3")


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        super().__init__(f"line {line}, col {col}: {message}")


# ---------------------------------------------------------------------------
# Tokens
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"[^"\n]*")
  | (?P<nat>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<arrow>->)
  | (?P<op>[-+*/^()=:{},|])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# Problem data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Expectation:
    family: object                  # CandidateFamily
    branches: tuple | None          # None: the family is expected to be unsatisfiable
    text: str = ""


@dataclass(frozen=True)
class OracleSpec:
    window: tuple
    codomain: tuple
    fixed: tuple = ()               # ((param, Fraction), ...)


@dataclass(frozen=True)
class ProblemSpec:
    id: str
    domain: DomainKind
    codomain: DomainKind
    equation: Fact
    parameters: tuple = ()          # ((name, DomainKind | None), ...)
    expected: tuple = ()
    tier: str = "T3"
    oracle: OracleSpec | None = None
    source: str = ""

    @property
    def param_names(self) -> tuple:
        return tuple(n for n, _ in self.parameters)

    @property
    def variables(self) -> list[str]:
        return self.equation.var_names


class _Quotient(Expression):
    """Division node; only produced inside family closed forms."""

    def __init__(self, num: Expression, den: Expression):
        self.num = num
        self.den = den


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0
        # name resolution context
        self.variables: set[str] | None = None
        self.params: set[str] = set()
        self.allow_division = False
        self.family_mode = False

    # -- helpers -------------------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        t = tok or self.tok
        return ParseError(msg, t.line, t.col)

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "ident", "arrow")

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return self.advance()

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            raise self.error(f"expected identifier, found {self.tok.text or 'end of input'!r}")
        return self.advance()

    # -- expressions ---------------------------------------------------------
    def expr(self) -> Expression:
        terms = [self.term()]
        while self.at("+") or self.at("-"):
            op = self.advance().text
            t = self.term()
            terms.append(t if op == "+" else Product((RationalConstant(-1), t)))
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))

    def term(self) -> Expression:
        result = self.factor()
        factors = [result]
        while self.at("*") or (self.allow_division and self.at("/")):
            op = self.advance().text
            nxt = self.factor()
            if op == "*":
                factors.append(nxt)
            else:
                num = factors[0] if len(factors) == 1 else Product(tuple(factors))
                factors = [_Quotient(num, nxt)]
        return factors[0] if len(factors) == 1 else Product(tuple(factors))

    def factor(self) -> Expression:
        base = self.base()
        if self.at("^"):
            self.advance()
            if self.tok.kind != "nat":
                raise self.error("exponent must be a natural number")
            n = int(self.advance().text)
            return power(base, n)
        return base

    def base(self) -> Expression:
        t = self.tok
        if t.kind == "nat":
            self.advance()
            if self.at("/") and self.peek().kind == "nat":
                self.advance()
                den = int(self.advance().text)
                if den == 0:
                    raise self.error("zero denominator", t)
                return RationalConstant(int(t.text), den)
            return RationalConstant(int(t.text))
        if self.at("-"):
            self.advance()
            return Product((RationalConstant(-1), self.factor()))
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "ident":
            if t.text == "f":
                if self.family_mode:
                    raise self.error("closed forms cannot mention f", t)
                self.advance()
                self.expect("(")
                arg = self.expr()
                if self.at(","):
                    n = 2
                    while self.at(","):
                        self.advance()
                        self.expr()
                        if self.at(","):
                            n += 1
                    raise self.error(f"f takes exactly one argument (arity {n} given)", t)
                self.expect(")")
                return FApply(arg)
            if t.text in KEYWORDS:
                raise self.error(f"unexpected keyword {t.text!r}", t)
            self.advance()
            name = t.text
            if name in self.params:
                return Parameter(name)
            if self.variables is None or name in self.variables:
                return Variable(name)
            raise self.error(f"undeclared variable {name!r}", t)
        raise self.error(f"unexpected token {t.text or 'end of input'!r}")

    # -- problem blocks ------------------------------------------------------
    def domain_token(self) -> DomainKind:
        t = self.ident()
        text = t.text
        if text in ("R", "N") and self.tok.kind == "op" and self.tok.text in ("+", "*"):
            text += self.advance().text
        try:
            return DomainKind.from_token(text)
        except ValueError:
            raise self.error(f"unknown domain token {text!r}", t) from None

    def signed_int(self) -> int:
        neg = False
        if self.at("-"):
            self.advance()
            neg = True
        if self.tok.kind != "nat":
            raise self.error("expected an integer")
        v = int(self.advance().text)
        return -v if neg else v

    def signed_rational(self) -> Fraction:
        sign = 1
        if self.at("-"):
            self.advance()
            sign = -1
        if self.tok.kind != "nat":
            raise self.error("expected a number")
        num = int(self.advance().text)
        den = 1
        if self.at("/"):
            self.advance()
            den = int(self.advance().text)
        return sign * Fraction(num, den)

    def range_(self) -> tuple:
        lo = self.signed_int()
        self.expect(":")
        hi = self.signed_int()
        if lo > hi:
            raise self.error("empty range")
        return (lo, hi)

    def problem(self) -> ProblemSpec:
        start = self.tok
        self.expect("problem")
        if self.tok.kind != "string":
            raise self.error("expected quoted problem id")
        pid = self.advance().text.strip('"')
        self.expect("{")
        domain = codomain = None
        params: list = []
        tier = None
        oracle = None
        while not self.at("forall"):
            if self.at("domain"):
                self.advance()
                self.expect(":")
                domain = self.domain_token()
                self.expect("->")
                codomain = self.domain_token()
            elif self.at("param"):
                self.advance()
                name = self.ident().text
                self.expect(":")
                params.append((name, self.domain_token()))
            elif self.at("tier"):
                self.advance()
                self.expect(":")
                t = self.ident()
                if t.text not in TIERS:
                    raise self.error(f"unknown tier {t.text!r}", t)
                tier = t.text
            elif self.at("oracle"):
                self.advance()
                self.expect(":")
                window = self.range_()
                self.expect("->")
                crange = self.range_()
                fixed = []
                if self.at("with"):
                    self.advance()
                    while True:
                        name = self.ident().text
                        self.expect("=")
                        fixed.append((name, self.signed_rational()))
                        if not self.at(","):
                            break
                        self.advance()
                oracle = OracleSpec(window, crange, tuple(fixed))
            else:
                raise self.error(f"unexpected {self.tok.text or 'end of input'!r} in problem header")
        if domain is None:
            raise self.error("missing 'domain:' header", start)
        self.expect("forall")
        names = []
        while self.tok.kind == "ident" and not self.at(":"):
            t = self.advance()
            if t.text in KEYWORDS or t.text == "f":
                raise self.error(f"reserved name {t.text!r}", t)
            names.append(t.text)
        if not names:
            raise self.error("forall needs at least one variable")
        self.expect(":")
        self.variables = set(names)
        self.params = {n for n, _ in params}
        lhs = self.expr()
        self.expect("=")
        rhs = self.expr()
        self.variables = None
        equation = Fact(normalize(lhs), normalize(rhs), tuple((n, domain) for n in names),
                        provenance="axiom", codomain=codomain)
        expected = []
        while self.at("expect"):
            expected.append(self.expectation())
        self.expect("}")
        if tier is None:
            tier = "T2" if expected else "T3"
        if (tier == "T3") != (not expected):
            raise self.error(f"problem {pid!r}: tier T3 exactly when there are no expect blocks", start)
        return ProblemSpec(pid, domain, codomain, equation, tuple(params), tuple(expected),
                           tier, oracle)

    def expectation(self) -> Expectation:
        first = self.expect("expect")
        self.expect("f")
        self.expect("(")
        t = self.ident()
        if t.text != "x":
            raise self.error("family must be written as f(x) = ...", t)
        self.expect(")")
        self.expect("=")
        problem_params = set(self.params)
        self.family_mode = True
        self.allow_division = True
        self.variables = {"x"}
        # every other identifier in a closed form is a family parameter
        self.params = _IdentsExcept("x")
        body_start = self.i
        tree = self.expr()
        self.allow_division = False
        self.family_mode = False
        family = family_from_tree(tree, self.tokens[body_start])
        branches: tuple | None = ((),)
        if self.at("where"):
            self.advance()
            self.variables = set()
            self.params = _IdentsExcept(None)
            if self.at("unsat"):
                self.advance()
                branches = None
            else:
                out = [self.branch()]
                while self.at("|"):
                    self.advance()
                    out.append(self.branch())
                branches = tuple(out)
        self.variables = None
        self.params = problem_params
        text = " ".join(tok.text for tok in self.tokens[self.tokens.index(first) + 1:self.i])
        return Expectation(family, branches, text)

    def branch(self) -> tuple:
        eqs = []
        while True:
            lhs = self.expr()
            self.expect("=")
            rhs = self.expr()
            eqs.append(normalize(lhs) - normalize(rhs))
            if not self.at(","):
                break
            self.advance()
        return tuple(eqs)


class _IdentsExcept:
    """Membership test accepting every identifier but one."""

    def __init__(self, excluded):
        self.excluded = excluded

    def __contains__(self, name):
        return name != self.excluded

    def __iter__(self):
        return iter(())


def _tree_to_ratfunc(e):
    from .family import RatFunc
    if isinstance(e, _Quotient):
        return _tree_to_ratfunc(e.num) / _tree_to_ratfunc(e.den)
    if isinstance(e, Sum):
        acc = RatFunc(Poly())
        for t in e.terms:
            acc = acc + _tree_to_ratfunc(t)
        return acc
    if isinstance(e, Product):
        acc = RatFunc(ONE)
        for t in e.factors:
            acc = acc * _tree_to_ratfunc(t)
        return acc
    from .core import Power
    if isinstance(e, Power):
        return _tree_to_ratfunc(e.base) ** e.exponent
    return RatFunc(normalize(e))


def family_from_tree(tree: Expression, tok: Token | None = None):
    from .family import CandidateFamily, UnsupportedFamily
    rf = _tree_to_ratfunc(tree)
    num, den = rf.num, rf.den
    x = Poly.var("x")
    if not den.is_constant():
        # a/x + b arrives as (a + b*x)/x possibly scaled; normalize the scale
        content = den.terms[0][1]
        num, den = num.scale(1 / content), den.scale(1 / content)
    elif den != ONE:
        num, den = num.scale(1 / den.constant_value()), ONE
    try:
        return CandidateFamily(num, den)
    except UnsupportedFamily as exc:
        if tok is not None:
            raise ParseError(str(exc), tok.line, tok.col) from None
        raise


# ---------------------------------------------------------------------------
# Public entry points
# ---------------------------------------------------------------------------

def parse_problems(text: str) -> list[ProblemSpec]:
    p = _Parser(text)
    out = []
    while p.tok.kind != "eof":
        spec = p.problem()
        out.append(spec)
    if not out:
        raise ParseError("no problem block found", 1, 1)
    return [_with_source(s, text) for s in out]


def _with_source(spec: ProblemSpec, text: str) -> ProblemSpec:
    from dataclasses import replace
    return replace(spec, source=text)


def parse_problem(text: str) -> ProblemSpec:
    problems = parse_problems(text)
    if len(problems) != 1:
        raise ParseError(f"expected one problem block, found {len(problems)}", 1, 1)
    return problems[0]


def load_problems(path) -> list[ProblemSpec]:
    return parse_problems(Path(path).read_text(encoding="utf-8"))


def parse_expr(text: str, variables=None, params=()) -> Poly:
    """Parse an expression; names in ``params`` become parameters."""
    p = _Parser(text)
    p.variables = set(variables) if variables is not None else None
    p.params = set(params)
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error(f"trailing input {p.tok.text!r}")
    return normalize(e)


def parse_family(text: str):
    """Parse a closed form in ``x``; any other name is a family parameter."""
    p = _Parser(text)
    p.family_mode = True
    p.allow_division = True
    p.variables = {"x"}
    p.params = _IdentsExcept("x")
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error(f"trailing input {p.tok.text!r}")
    return family_from_tree(e, p.tokens[0])


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

def _atom_str(a) -> str:
    from .core import FApp
    if type(a) is FApp:
        return f"f({render(a.arg)})"
    return a.name


def _mono_str(m) -> str:
    # parameters print first, like coefficients
    parts = sorted(m, key=lambda ap: ({1: 0, 0: 1, 2: 2}[ap[0].tag], ap[0].key))
    out = []
    for a, p in parts:
        s = _atom_str(a)
        out.append(s if p == 1 else f"{s}^{p}")
    return "*".join(out)


def render(e) -> str:
    """Deterministic text for the canonical form of ``e``; parses back."""
    poly = lift(e)
    if poly.is_zero():
        return "0"
    pieces = []
    for idx, (m, c) in enumerate(poly.terms):
        neg = c < 0
        a = -c if neg else c
        if not m:
            body = str(a)
        elif a == 1:
            body = _mono_str(m)
        else:
            body = f"{a}*{_mono_str(m)}"
        if idx == 0:
            pieces.append(f"-{body}" if neg else body)
        else:
            pieces.append(f" - {body}" if neg else f" + {body}")
    return "".join(pieces)


def render_equation(poly: Poly) -> str:
    """``poly = 0`` written with the constant moved right: ``c^2 = 2017``."""
    poly = lift(poly)
    const = poly.constant_value()
    rest = poly - const
    if rest.is_zero():
        return f"{render(poly)} = 0"
    if const == 0 and len(rest.terms) > 1 and len(rest.terms[-1][0]) == 1 \
            and rest.terms[-1][0][0][1] == 1:
        # no constant: move a trailing linear term right, as in "c^2 + c = n"
        mono, c = rest.terms[-1]
        moved = Poly({mono: c})
        left = rest - moved
        if left.terms[0][1] < 0:
            left, moved = -left, -moved
        return f"{render(left)} = {render(-moved)}"
    if rest.terms[0][1] < 0:
        rest, const = -rest, -const
    return f"{render(rest)} = {render(Poly.const(-const))}"


def render_problem(spec: ProblemSpec) -> str:
    lines = [f'problem "{spec.id}" {{',
             f"  domain: {spec.domain.token} -> {spec.codomain.token}"]
    for name, dom in spec.parameters:
        lines.append(f"  param {name} : {dom.token}")
    lines.append(f"  tier: {spec.tier}")
    if spec.oracle:
        o = spec.oracle
        line = f"  oracle: {o.window[0]}:{o.window[1]} -> {o.codomain[0]}:{o.codomain[1]}"
        if o.fixed:
            line += " with " + ", ".join(f"{k}={v}" for k, v in o.fixed)
        lines.append(line)
    eq = spec.equation
    lines.append(f"  forall {' '.join(eq.var_names)} : {render(eq.lhs)} = {render(eq.rhs)}")
    for ex in spec.expected:
        s = f"  expect f(x) = {ex.family.render()}"
        if ex.branches is None:
            s += " where unsat"
        elif ex.branches != ((),):
            s += " where " + " | ".join(", ".join(render_equation(c) for c in br)
                                        for br in ex.branches)
        lines.append(s)
    lines.append("}")
    return "\n".join(lines)
