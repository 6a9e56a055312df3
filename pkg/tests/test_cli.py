import json
import shutil

import pytest

from funceq.cli import main
from funceq.search import DerivationTrace

from conftest import CORPUS


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def path(pid):
    return str(CORPUS / f"{pid}.fe")


def test_parse_intro(capsys):
    code, out, _ = run(capsys, "parse", path("intro"))
    assert code == 0 and 'problem "intro"' in out and "f(y + f(x)) = x + f(y)" in out


def test_parse_arity_error(tmp_path, capsys):
    bad = tmp_path / "bad.fe"
    bad.write_text((CORPUS / "intro.fe").read_text().replace("f(f(x)+y)", "f(x,y)")
                   .replace("f(f(x) + y)", "f(x, y)"))
    code, _, err = run(capsys, "parse", str(bad))
    assert code == 2 and "argument" in err


def test_parse_missing_file(tmp_path, capsys):
    code, _, _ = run(capsys, "parse", str(tmp_path / "nope.fe"))
    assert code == 3


def test_derive_intro(tmp_path, capsys):
    out_json = tmp_path / "trace.json"
    code, out, _ = run(capsys, "derive", path("intro"), "--json", str(out_json))
    assert code == 0
    assert out.rstrip().splitlines()[-1] == "Verified: f(x)=x | f(x)=-x"
    text = out_json.read_text()
    doc = json.loads(text)
    assert list(doc) == ["problem", "steps", "outcome"]
    assert {"move", "inputs", "output", "side_conditions"} <= set(doc["steps"][0])
    assert DerivationTrace.loads(text).dumps() == text


def test_derive_policy(capsys):
    code, _, err = run(capsys, "derive", path("p03"))
    assert code == 4 and "tier" in err


def test_derive_tiny_budget(capsys):
    code, out, _ = run(capsys, "derive", path("intro"), "--budget", "2,1")
    assert code == 1 and "Exhausted" in out


def test_derive_bad_budget(capsys):
    assert run(capsys, "derive", path("intro"), "--budget", "lots")[0] == 2


def test_verify_p01(capsys):
    code, out, _ = run(capsys, "verify", path("p01"), "--family", "c*x")
    assert code == 0 and "c^2 = 2017" in out


def test_verify_p07(capsys):
    code, out, _ = run(capsys, "verify", path("p07"), "--family", "x + a")
    assert code == 0 and "a = 0" in out


def test_verify_p06_wrong_family(capsys):
    code, out, _ = run(capsys, "verify", path("p06"), "--family", "x")
    assert code == 1 and "Unsatisfiable" in out


def test_verify_expectations(capsys):
    assert run(capsys, "verify", path("p21"))[0] == 0


def test_verify_with_params(capsys):
    code, out, _ = run(capsys, "verify", path("p18"), "--params", "n=2")
    assert code == 0 and "c = 1" in out and "c = -2" in out


def test_oracle_command(capsys):
    code, out, _ = run(capsys, "oracle", path("p20"), "--window", "-2:2", "--codomain", "-4:4")
    assert code == 0 and "6 assignment" in out


def test_oracle_rejects_real_domain(capsys):
    assert run(capsys, "oracle", path("intro"), "--window", "-1:1", "--codomain", "-1:1")[0] != 0


def test_corpus_t1(capsys):
    code, out, _ = run(capsys, "corpus", "--tier", "T1")
    assert code == 0 and "5/5 passed" in out


def test_corpus_t3_exploratory(capsys):
    code, out, _ = run(capsys, "corpus", "--tier", "T3")
    assert code == 0
    rows = [l for l in out.splitlines() if l.startswith("practice")]
    assert len(rows) == 7 and all("exploratory" in r for r in rows)


def test_corpus_mutated_expectation(tmp_path, capsys):
    for pid in ("intro", "p01", "p20"):
        shutil.copy(CORPUS / f"{pid}.fe", tmp_path)
    p01 = tmp_path / "p01.fe"
    p01.write_text(p01.read_text().replace("c^2 = 2017", "c^2 = -2017"))
    code, out, _ = run(capsys, "corpus", str(tmp_path))
    assert code == 1
    fails = [l for l in out.splitlines() if " FAIL " in l]
    assert len(fails) == 1 and fails[0].startswith("p01")


def test_corpus_report(tmp_path, capsys):
    src = tmp_path / "src"
    src.mkdir()
    for pid in ("p18", "p20"):
        shutil.copy(CORPUS / f"{pid}.fe", src)
    rep = tmp_path / "rep"
    code, out, _ = run(capsys, "corpus", str(src), "--oracle", "--report", str(rep))
    assert code == 0
    for name in ("corpus.csv", "times.png", "oracle.png"):
        assert (rep / name).stat().st_size > 0
    csv_lines = (rep / "corpus.csv").read_text().splitlines()
    assert len(csv_lines) == 3 and csv_lines[0].startswith("problem")


def test_corpus_missing_dir(tmp_path, capsys):
    assert run(capsys, "corpus", str(tmp_path / "none"))[0] == 3
