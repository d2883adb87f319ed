"""Figures rendered from run metrics documents.

Only the ``report`` command calls into this module; learning and evaluation
never draw anything.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _label(doc: Mapping[str, Any]) -> str:
    return f"{doc['domain']} ({doc['model']})"


def learning_curves(docs: Sequence[Mapping[str, Any]], path: Path) -> Path:
    """Satisficing rate and unsatisfied task count per iteration, one line
    per seed of each learning run."""
    fig, (ax_rho, ax_nu) = plt.subplots(1, 2, figsize=(10, 4))
    for doc in docs:
        for s in doc["seeds"]:
            trace = s.get("trace") or []
            if not trace:
                continue
            its = [r["i"] for r in trace]
            name = f"{_label(doc)} seed {s['seed']}"
            ax_rho.plot(its, [r["rho"] for r in trace], marker="o",
                        label=name)
            ax_nu.plot(its, [r["nu"] for r in trace], marker="o",
                       label=name)
    ax_rho.set_xlabel("iteration")
    ax_rho.set_ylabel("satisficing rate")
    ax_rho.set_ylim(-0.05, 1.05)
    ax_nu.set_xlabel("iteration")
    ax_nu.set_ylabel("unsatisfied tasks")
    if ax_rho.lines:
        ax_rho.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def eval_summary(docs: Sequence[Mapping[str, Any]], path: Path) -> Path:
    """Bar chart of mean test solve rate per run."""
    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(docs) + 2), 4))
    names = [_label(d) for d in docs]
    rates = [d["aggregate"].get("solve_rate", 0.0) for d in docs]
    ax.bar(range(len(docs)), rates)
    ax.set_xticks(range(len(docs)), names, rotation=30, ha="right")
    ax.set_ylabel("solve rate")
    ax.set_ylim(0, 1.05)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def render_report(docs: Sequence[Mapping[str, Any]],
                  out_dir: Path) -> List[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [eval_summary(docs, out_dir / "eval_summary.png")]
    learned: List[Dict[str, Any]] = [dict(d) for d in docs
                                     if any(s.get("trace")
                                            for s in d["seeds"])]
    if learned:
        paths.append(learning_curves(learned,
                                     out_dir / "learning_curves.png"))
    return paths
