"""Corpus report files: a CSV table and matplotlib figures."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


@dataclass
class CorpusRow:
    problem: str
    tier: str
    status: str                 # PASS | FAIL | exploratory
    verify: str = ""
    derive: str = ""
    steps: int = 0
    oracle: str = ""
    assignments: int = 0
    explained: int = 0
    seconds: float = 0.0
    detail: str = ""


COLUMNS = [f.name for f in fields(CorpusRow)]
STATUS_COLORS = {"PASS": "#3a7d44", "FAIL": "#b23a48", "exploratory": "#8c8c8c"}


def write_csv(rows: list[CorpusRow], path: Path) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COLUMNS)
        w.writeheader()
        for r in rows:
            d = asdict(r)
            d["seconds"] = f"{r.seconds:.4f}"
            w.writerow(d)
    return path


def plot_times(rows: list[CorpusRow], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(max(6, 0.32 * len(rows)), 4))
    xs = range(len(rows))
    ax.bar(xs, [max(r.seconds, 1e-4) for r in rows],
           color=[STATUS_COLORS.get(r.status, "#444") for r in rows])
    ax.set_yscale("log")
    ax.set_xticks(list(xs))
    ax.set_xticklabels([r.problem for r in rows], rotation=70, fontsize=7)
    ax.set_ylabel("wall time (s)")
    ax.set_title("corpus run time per problem")
    handles = [plt.Rectangle((0, 0), 1, 1, color=c) for c in STATUS_COLORS.values()]
    ax.legend(handles, list(STATUS_COLORS), fontsize=7, loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_oracle(rows: list[CorpusRow], path: Path) -> Path | None:
    rows = [r for r in rows if r.oracle]
    if not rows:
        return None
    fig, ax = plt.subplots(figsize=(max(4, 0.9 * len(rows)), 4))
    xs = list(range(len(rows)))
    explained = [r.explained for r in rows]
    artifacts = [r.assignments - r.explained for r in rows]
    ax.bar(xs, explained, color="#3a7d44", label="verified solutions")
    ax.bar(xs, artifacts, bottom=explained, color="#d9a441", label="window artifacts")
    ax.set_yscale("symlog", linthresh=10)
    ax.set_xticks(xs)
    ax.set_xticklabels([r.problem for r in rows])
    ax.set_ylabel("window assignments")
    ax.set_title("finite-window oracle output")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def write_report(rows: list[CorpusRow], directory) -> list[Path]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = [write_csv(rows, out / "corpus.csv"), plot_times(rows, out / "times.png")]
    oracle = plot_oracle(rows, out / "oracle.png")
    if oracle is not None:
        written.append(oracle)
    return written
