"""``fe`` command line: parse, derive, verify, oracle and corpus runs.

Exit codes: 0 pass, 1 fail or unverified, 2 syntax error, 3 I/O error,
4 policy (tier not automatable, no oracle window).
"""

from __future__ import annotations

import argparse
import sys
import time
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .family import UnsupportedFamily
from .oracle import OracleError, cross_check, finite_search, naive_validate
from .parse import ParseError, ProblemSpec, load_problems, parse_family, render_problem
from .report import CorpusRow, write_report
from .search import DEFAULT_BUDGET, DerivationTrace, Outcome, derive, solution_texts
from .verify import UNSATISFIABLE, check_expectation, verify_family

EXIT_OK, EXIT_FAIL, EXIT_SYNTAX, EXIT_IO, EXIT_POLICY = 0, 1, 2, 3, 4
VALUE_FLAGS = ("--window", "--codomain", "--params", "--budget", "--family")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


def default_corpus() -> Path:
    return Path(str(resources.files("funceq") / "corpus"))


def _load(path) -> list[ProblemSpec]:
    try:
        return load_problems(path)
    except OSError as exc:
        raise CliError(EXIT_IO, f"{path}: {exc.strerror or exc}") from None
    except ParseError as exc:
        raise CliError(EXIT_SYNTAX, f"{path}: {exc}") from None


def _range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    try:
        return int(lo), int(hi)
    except ValueError:
        raise CliError(EXIT_SYNTAX, f"expected lo:hi, got {text!r}") from None


def _params(text: str | None) -> dict[str, Fraction]:
    out = {}
    for item in filter(None, (text or "").split(",")):
        k, _, v = item.partition("=")
        try:
            out[k.strip()] = Fraction(v.strip())
        except ValueError:
            raise CliError(EXIT_SYNTAX, f"bad parameter value {item!r}") from None
    return out


def _budget(text: str | None) -> tuple[int, int]:
    if not text:
        return DEFAULT_BUDGET
    n, _, d = text.partition(",")
    try:
        return int(n), int(d or DEFAULT_BUDGET[1])
    except ValueError:
        raise CliError(EXIT_SYNTAX, f"expected --budget N,D, got {text!r}") from None


def expected_outcome(p: ProblemSpec) -> Outcome:
    """Outcome built from the satisfiable expectations of a problem."""
    sols: list[str] = []
    for exp in p.expected:
        if exp.branches is None:
            continue
        for text in solution_texts(verify_family(p, exp.family)):
            if text not in sols:
                sols.append(text)
    return Outcome("Verified" if sols else "Exhausted", tuple(sols))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_parse(args) -> int:
    for p in _load(args.file):
        print(render_problem(p))
    return EXIT_OK


def cmd_derive(args) -> int:
    problems = _load(args.file)
    budget = _budget(args.budget)
    code = EXIT_OK
    for p in problems:
        if p.tier != "T1" and not args.force:
            print(f"{p.id}: tier {p.tier} not automatable (use --force)", file=sys.stderr)
            return EXIT_POLICY
    for p in problems:
        trace = derive(p, budget)
        print(trace.render())
        if args.json:
            path = Path(args.json)
            if len(problems) > 1:
                path = path.with_name(f"{path.stem}.{p.id}{path.suffix}")
            try:
                path.write_text(trace.dumps())
            except OSError as exc:
                raise CliError(EXIT_IO, f"{path}: {exc.strerror or exc}") from None
        if trace.outcome.status != "Verified":
            code = EXIT_FAIL
    return code


def cmd_verify(args) -> int:
    params = _params(args.params)
    code = EXIT_OK
    for p in _load(args.file):
        if args.family:
            try:
                fam = parse_family(args.family)
                cs = verify_family(p, fam, params or None)
            except ParseError as exc:
                raise CliError(EXIT_SYNTAX, f"--family: {exc}") from None
            except UnsupportedFamily as exc:
                raise CliError(EXIT_FAIL, f"unsupported family: {exc}") from None
            matching = [e for e in p.expected if e.family == fam]
            if matching:
                ok = all(check_expectation(p, e, params or None)[0] for e in matching)
            else:
                ok = cs.status != UNSATISFIABLE
            print(f"{p.id}: f(x) = {fam.render()} -> {cs.render()}"
                  f"{'' if ok else '  [FAIL]'}")
            if not ok:
                code = EXIT_FAIL
            continue
        if not p.expected:
            print(f"{p.id}: no expectations")
        for exp in p.expected:
            ok, cs = check_expectation(p, exp, params or None)
            print(f"{p.id}: expect {exp.family.render()} -> {cs.render()}"
                  f"  [{'ok' if ok else 'FAIL'}]")
            if not ok:
                code = EXIT_FAIL
    return code


def run_oracle(p: ProblemSpec, window=None, codomain=None, fixed=None):
    """Finite search plus naive re-check and cross check; returns (ok, result, report, agree)."""
    result = finite_search(p, window, codomain, fixed or None)
    agree = sum(1 for a in result.as_dicts() if not naive_validate(p, a, result.window, fixed or None))
    if p.tier == "T1":
        trace = derive(p)
    else:
        trace = DerivationTrace(p.id, [], expected_outcome(p))
    report = cross_check(trace, result, p, result.window, fixed or None)
    ok = report.ok and agree == len(result) and not result.truncated
    return ok, result, report, agree


def cmd_oracle(args) -> int:
    fixed = _params(args.params)
    code = EXIT_OK
    for p in _load(args.file):
        window = _range(args.window) if args.window else None
        codomain = _range(args.codomain) if args.codomain else None
        try:
            ok, result, report, agree = run_oracle(p, window, codomain, fixed)
        except OracleError as exc:
            print(f"{p.id}: {exc}")
            return EXIT_POLICY
        print(f"{p.id}: {len(result)} assignment(s) on window {result.window} "
              f"with values in {result.codomain}, {result.instances} instances, "
              f"{result.elapsed:.2f}s")
        print(f"  naive validator agrees on {agree}/{len(result)}")
        print("  " + report.render().replace("\n", "\n  "))
        if args.show:
            for a in result.assignments:
                print("  " + " ".join(f"f({k})={v}" for k, v in zip(result.points, a)))
        if not ok:
            code = EXIT_FAIL
    return code


def corpus_files(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise CliError(EXIT_IO, f"{d}: not a directory")
    return sorted(d.glob("*.fe"))


def run_problem(p: ProblemSpec, with_oracle: bool) -> CorpusRow:
    start = time.perf_counter()
    row = CorpusRow(p.id, p.tier, "PASS")
    failures = []
    verdicts = []
    for exp in p.expected:
        ok, cs = check_expectation(p, exp)
        verdicts.append(f"{exp.family.render()}: {cs.render()}")
        if not ok:
            failures.append(f"expectation {exp.family.render()} gave {cs.render()}")
    row.verify = "; ".join(verdicts)
    if p.tier in ("T1", "T3"):
        trace = derive(p)
        row.derive = trace.outcome.text
        row.steps = len(trace.steps)
        if p.tier == "T1" and trace.outcome.status != "Verified":
            failures.append(f"derivation ended {trace.outcome.text}")
    if with_oracle and p.oracle is not None:
        try:
            ok, result, report, agree = run_oracle(p)
            row.oracle = "ok" if ok else "FAIL"
            row.assignments = len(result)
            row.explained = len(result) - len(report.unexplained)
            if not ok:
                failures.append("oracle: " + report.render().replace("\n", " /"))
        except OracleError as exc:
            row.oracle = "FAIL"
            failures.append(f"oracle: {exc}")
    row.seconds = time.perf_counter() - start
    if p.tier == "T3":
        row.status = "exploratory"
    elif failures:
        row.status = "FAIL"
    row.detail = "; ".join(failures)
    return row


def run_corpus(directory, tiers=None, with_oracle=False) -> list[CorpusRow]:
    rows = []
    for path in corpus_files(directory):
        try:
            problems = load_problems(path)
        except (OSError, ParseError) as exc:
            rows.append(CorpusRow(path.stem, "?", "FAIL", detail=str(exc)))
            continue
        for p in problems:
            if tiers and p.tier not in tiers:
                continue
            rows.append(run_problem(p, with_oracle))
    return rows


def format_rows(rows: list[CorpusRow]) -> str:
    lines = [f"{'problem':12s} {'tier':4s} {'status':11s} {'time':>8s}  outcome"]
    for r in rows:
        outcome = r.derive or r.verify or r.detail
        if r.oracle:
            outcome += f" | oracle {r.oracle} ({r.assignments} assignments)"
        lines.append(f"{r.problem:12s} {r.tier:4s} {r.status:11s} {r.seconds:7.3f}s  {outcome}")
        if r.status == "FAIL" and r.detail:
            lines.append(f"{'':30s}{r.detail}")
    return "\n".join(lines)


def cmd_corpus(args) -> int:
    directory = args.dir or default_corpus()
    tiers = set(args.tier) if args.tier else None
    rows = run_corpus(directory, tiers, args.oracle)
    print(format_rows(rows))
    counted = [r for r in rows if r.status != "exploratory"]
    failed = [r for r in counted if r.status == "FAIL"]
    print(f"{len(counted) - len(failed)}/{len(counted)} passed"
          f"{f', {len(rows) - len(counted)} exploratory' if len(rows) > len(counted) else ''}")
    if args.report:
        try:
            for path in write_report(rows, args.report):
                print(f"wrote {path}")
        except OSError as exc:
            raise CliError(EXIT_IO, f"{args.report}: {exc.strerror or exc}") from None
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fe", description="functional equation toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("parse", help="parse and echo a problem file")
    sp.add_argument("file")
    sp.set_defaults(run=cmd_parse)

    sp = sub.add_parser("derive", help="search for a derivation")
    sp.add_argument("file")
    sp.add_argument("--budget", help="max facts and max rounds, as N,D")
    sp.add_argument("--json", help="write the trace document to this path")
    sp.add_argument("--force", action="store_true", help="derive below tier T1")
    sp.set_defaults(run=cmd_derive)

    sp = sub.add_parser("verify", help="verify candidate families")
    sp.add_argument("file")
    sp.add_argument("--family", help="closed form in x, e.g. 'a*x + b'")
    sp.add_argument("--params", help="fixed parameter values, k=v,..")
    sp.set_defaults(run=cmd_verify)

    sp = sub.add_parser("oracle", help="finite-window search")
    sp.add_argument("file")
    sp.add_argument("--window", help="lo:hi")
    sp.add_argument("--codomain", help="lo:hi")
    sp.add_argument("--params", help="fixed parameter values, k=v,..")
    sp.add_argument("--show", action="store_true", help="print every assignment")
    sp.set_defaults(run=cmd_oracle)

    sp = sub.add_parser("corpus", help="run a problem directory")
    sp.add_argument("dir", nargs="?", help="defaults to the bundled corpus")
    sp.add_argument("--tier", action="append", choices=["T1", "T2", "T3"])
    sp.add_argument("--oracle", action="store_true", help="also run finite-window checks")
    sp.add_argument("--report", help="directory for corpus.csv and figures")
    sp.set_defaults(run=cmd_corpus)
    return ap


def _join_values(argv: list[str]) -> list[str]:
    """Turn ``--window -3:3`` into ``--window=-3:3`` so argparse accepts it."""
    out = []
    i = 0
    while i < len(argv):
        a = argv[i]
        if a in VALUE_FLAGS and i + 1 < len(argv):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(_join_values(argv))
    except SystemExit as exc:
        return EXIT_SYNTAX if exc.code else EXIT_OK
    try:
        return args.run(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
