"""Command line: learn, evaluate, inspect and report.

Every command prints a tab-separated table on stdout.  Run directories hold
a ``metrics.json`` (deterministic for a given configuration and seed), a
``timing.json`` with wall-clock times, and one ``seed<k>/`` folder per seed
with the learned predicates, operators, iteration trace and dataset.
"""

from __future__ import annotations

import json
import logging
import statistics
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import click

from predinv import __version__
from predinv.abstraction import abstract
from predinv.core import PredinvError
from predinv.data import abstract_dataset
from predinv.dsl import DSLError, PredicateTable, parse, pretty, typecheck
from predinv.envs import DOMAINS, make_domain
from predinv.envs.spec import DomainSpec
from predinv.learner import ALPHA, ALPHA_SEL
from predinv.online import (EvalResult, OnlineConfig, OnlineResult, evaluate,
                            run_online)
from predinv.perceiver import Perceiver, PerceiverConfig
from predinv.planner import DEFAULT_NODE_BUDGET
from predinv.proposer import EndpointConfig, ExternalProposer, \
    ScriptedProposer
from predinv.worldmodel import HLA, ModelError, format_model, parse_model

logger = logging.getLogger("predinv")

PREDICATES_FILE = "predicates.nsp"
OPERATORS_FILE = "operators.txt"
TRACE_FILE = "trace.jsonl"
DATASET_FILE = "dataset.jsonl"
METRICS_FILE = "metrics.json"
TIMING_FILE = "timing.json"

EVAL_COLUMNS = ("solve_rate", "plans_used", "plans_per_solved", "nodes",
                "no_plan", "invalid_plans")


# ------------------------------------------------------------ helpers

def _fraction(_ctx, _param, value: Optional[str]) -> Optional[Fraction]:
    if value is None:
        return None
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError):
        raise click.BadParameter(f"{value!r} is not a number") from None


def _proposer(mode: str, spec: DomainSpec):
    if mode == "scripted":
        return ScriptedProposer.for_domain(spec)
    if mode.startswith("external:") and len(mode) > len("external:"):
        return ExternalProposer(EndpointConfig(mode[len("external:"):]))
    raise click.BadParameter(
        f"{mode!r}; use 'scripted' or 'external:<url>'",
        param_hint="--proposer")


def _seeds(seed: int, n: Optional[int]) -> List[int]:
    return list(range(seed, seed + (n or 1)))


def _write_json(path: Path, doc: Any) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def _table(rows: Sequence[Dict[str, Any]], columns: Sequence[str]) -> str:
    def fmt(v):
        if isinstance(v, float):
            return f"{v:.4f}"
        return str(v)
    lines = ["\t".join(columns)]
    for r in rows:
        lines.append("\t".join(fmt(r.get(c, "")) for c in columns))
    return "\n".join(lines)


def _aggregate(rows: Sequence[Dict[str, Any]]) -> Dict[str, float]:
    """Mean over seeds of every numeric eval column."""
    return {c: statistics.fmean(float(r[c]) for r in rows)
            for c in EVAL_COLUMNS if rows and c in rows[0]}


def save_model(out: Path, table: PredicateTable, hlas: Sequence[HLA]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    text = "\n\n".join(pretty(table[n]) for n in _decl_order(table))
    (out / PREDICATES_FILE).write_text(text + "\n", encoding="utf-8")
    (out / OPERATORS_FILE).write_text(format_model(
        sorted(hlas, key=lambda h: h.name)), encoding="utf-8")


def _decl_order(table: PredicateTable) -> List[str]:
    """Primitives by name, then derived predicates in stratum order."""
    prims = sorted(d.name for d in table.primitives)
    return prims + [n for s in table.strata for n in s]


def load_model(path: Path, spec: DomainSpec
               ) -> Tuple[PredicateTable, List[HLA]]:
    preds, ops = path / PREDICATES_FILE, path / OPERATORS_FILE
    for f in (preds, ops):
        if not f.is_file():
            raise click.BadParameter(f"missing {f}", param_hint="--model")
    table = typecheck(parse(preds.read_text(encoding="utf-8")), spec.types)
    hlas = parse_model(ops.read_text(encoding="utf-8"), spec.skills,
                       spec.types)
    for h in hlas:
        h.check_against(table)
    return table, hlas


def _resolve_model(model: str, spec: DomainSpec
                   ) -> Tuple[PredicateTable, List[HLA]]:
    if model == "oracle":
        return spec.oracle_table, list(spec.oracle_hlas)
    if model == "initial":
        return spec.initial_table, list(spec.initial_hlas)
    if model.startswith("learned:"):
        return load_model(Path(model[len("learned:"):]), spec)
    raise click.BadParameter(
        f"{model!r}; use oracle, initial or learned:<dir>",
        param_hint="--model")


def _eval_row(seed: int, res: EvalResult) -> Dict[str, Any]:
    row = {"seed": seed}
    row.update(res.as_dict())
    return row


def _dataset_records(result: OnlineResult, perceiver) -> List[Dict]:
    view = abstract_dataset(result.state.data, result.psi_best, perceiver)
    out = []
    for d in view:
        out.append({
            "skill": str(d.skill),
            "ok": d.ok,
            "pre": sorted(str(a) for a in d.pre),
            "post": None if d.post is None else sorted(str(a)
                                                       for a in d.post),
        })
    return out


def _export_pddl(out: Path, spec: DomainSpec, table: PredicateTable,
                 hlas: Sequence[HLA], task, perceiver) -> None:
    from predinv.pddl import export_planning_model
    out.mkdir(parents=True, exist_ok=True)
    s0 = abstract(task.init, table, perceiver).atoms
    dom, prob = export_planning_model(table, hlas, task, s0,
                                      f"predinv-{spec.name}")
    (out / "domain.pddl").write_text(dom, encoding="utf-8")
    (out / f"task{task.task_id}.pddl").write_text(prob, encoding="utf-8")


# ------------------------------------------------------------ commands

class _Group(click.Group):
    """Maps library errors to exit codes: malformed inputs (predicate or
    model files) are usage errors, anything else a runtime failure."""

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except (DSLError, ModelError) as e:
            raise click.UsageError(str(e), ctx) from e
        except PredinvError as e:
            raise click.ClickException(str(e)) from e


@click.group(cls=_Group)
@click.version_option(__version__, prog_name="predinv")
@click.option("-v", "--verbose", count=True, help="More log output.")
def main(verbose: int) -> None:
    """Online predicate invention over simulated skill domains."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


_domain = click.option("--domain", required=True,
                       type=click.Choice(DOMAINS), help="Domain name.")
_seed = click.option("--seed", default=0, show_default=True, type=int,
                     help="First seed.")
_nseeds = click.option("--seeds", "n_seeds", default=None, type=int,
                       help="Number of consecutive seeds to run.")
_budget = click.option("--budget", default=None, type=int,
                       help="Plans per task (default: the domain's).")
_node_budget = click.option("--node-budget", default=DEFAULT_NODE_BUDGET,
                            show_default=True, type=int,
                            help="Search node limit per task.")
_noise = click.option("--noise", default=0.0, show_default=True,
                      type=click.FloatRange(0.0, 1.0),
                      help="Perception flip probability.")
_out = click.option("--out", "out_dir", default=None,
                    type=click.Path(file_okay=False, path_type=Path),
                    help="Output directory.")
_parallel = click.option("--parallel-tasks", default=1, show_default=True,
                         type=click.IntRange(1),
                         help="Evaluation workers.")


@main.command()
@_domain
@_seed
@_nseeds
@click.option("--max-iters", default=10, show_default=True,
              type=click.IntRange(1), help="Learning iterations.")
@_budget
@_node_budget
@click.option("--alpha", default=str(ALPHA), show_default=True,
              callback=_fraction, help="Precondition size penalty.")
@click.option("--alpha-sel", default=str(ALPHA_SEL), show_default=True,
              callback=_fraction, help="Predicate count penalty.")
@click.option("--k-switch", default=1, show_default=True, type=int,
              help="Recorded plans before plan consistency joins the "
                   "selection score.")
@_noise
@click.option("--proposer", default="scripted", show_default=True,
              help="'scripted' or 'external:<url>'.")
@_out
@_parallel
@click.option("--export-pddl", is_flag=True,
              help="Also write PDDL for the first evaluation task.")
def run(domain, seed, n_seeds, max_iters, budget, node_budget, alpha,
        alpha_sel, k_switch, noise, proposer, out_dir, parallel_tasks,
        export_pddl) -> None:
    """Learn on training tasks, then evaluate on test tasks."""
    out_dir = out_dir or Path("runs") / domain
    rows, seeds_doc, timing = [], [], {}
    for s in _seeds(seed, n_seeds):
        spec, env, gen = make_domain(domain, s)
        source = _proposer(proposer, spec)
        n_abstract = budget or spec.n_abstract
        perceiver = Perceiver(spec.registry, PerceiverConfig(noise, s))
        cfg = OnlineConfig(max_iters, n_abstract, node_budget, alpha,
                           alpha_sel, k_switch)
        t0 = time.perf_counter()
        result = run_online(env, gen.train(), spec.initial_table,
                            spec.initial_hlas, source, cfg, perceiver)
        t_learn = time.perf_counter() - t0
        tests = gen.test()
        res = evaluate(result.psi_best, result.omega_best, env, tests,
                       n_abstract, perceiver, node_budget, parallel_tasks,
                       lambda: make_domain(domain, s)[1])
        sdir = out_dir / f"seed{s}"
        save_model(sdir, result.psi_best, result.omega_best)
        (sdir / TRACE_FILE).write_text(
            "".join(json.dumps(r.as_dict(), sort_keys=True) + "\n"
                    for r in result.trace), encoding="utf-8")
        (sdir / DATASET_FILE).write_text(
            "".join(json.dumps(r, sort_keys=True) + "\n"
                    for r in _dataset_records(result, perceiver)),
            encoding="utf-8")
        if export_pddl and tests:
            _export_pddl(sdir / "pddl", spec, result.psi_best,
                         result.omega_best, tests[0], perceiver)
        row = _eval_row(s, res)
        row["iterations"] = len(result.trace)
        rows.append(row)
        seeds_doc.append({
            "seed": s,
            "eval": res.as_dict(),
            "train": {"rho_best": result.state.rho_best,
                      "nu_best": result.state.nu_best,
                      "iterations": len(result.trace),
                      "budget_exhausted": result.budget_exhausted,
                      "invalid_plans": result.invalid_plans},
            "psi": sorted(result.psi_best.names),
            "trace": [r.as_dict() for r in result.trace],
        })
        timing[str(s)] = {"learn_s": t_learn, "eval_s": res.wall_time,
                          "iterations_s": [r.wall_time
                                           for r in result.trace]}
    doc = {
        "command": "run",
        "domain": domain,
        "model": "learned",
        "config": {"max_iters": max_iters, "n_abstract":
                   budget or spec.n_abstract, "node_budget": node_budget,
                   "alpha": str(alpha), "alpha_sel": str(alpha_sel),
                   "k_switch": k_switch, "noise": noise,
                   "proposer": proposer},
        "seeds": seeds_doc,
        "aggregate": _aggregate(rows),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / METRICS_FILE, doc)
    _write_json(out_dir / TIMING_FILE, timing)
    click.echo(_table(rows, ("seed",) + EVAL_COLUMNS + ("iterations",)))
    click.echo(_table([dict(seed="mean", **doc["aggregate"])],
                      ("seed",) + EVAL_COLUMNS))


@main.command("eval")
@_domain
@click.option("--model", required=True,
              help="oracle, initial or learned:<dir>.")
@_seed
@_nseeds
@_budget
@_node_budget
@_noise
@_out
@_parallel
def eval_cmd(domain, model, seed, n_seeds, budget, node_budget, noise,
             out_dir, parallel_tasks) -> None:
    """Evaluate a frozen model on test tasks."""
    rows, timing = [], {}
    spec = None
    for s in _seeds(seed, n_seeds):
        spec, env, gen = make_domain(domain, s)
        table, hlas = _resolve_model(model, spec)
        perceiver = Perceiver(spec.registry, PerceiverConfig(noise, s))
        n_abstract = budget or spec.n_abstract
        res = evaluate(table, hlas, env, gen.test(), n_abstract, perceiver,
                       node_budget, parallel_tasks,
                       lambda: make_domain(domain, s)[1])
        rows.append(_eval_row(s, res))
        timing[str(s)] = {"eval_s": res.wall_time}
    doc = {"command": "eval", "domain": domain,
           "model": model if not model.startswith("learned:")
           else "learned",
           "config": {"n_abstract": budget or spec.n_abstract,
                      "node_budget": node_budget, "noise": noise},
           "seeds": [{"seed": r["seed"],
                      "eval": {k: v for k, v in r.items() if k != "seed"}}
                     for r in rows],
           "aggregate": _aggregate(rows)}
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(out_dir / METRICS_FILE, doc)
        _write_json(out_dir / TIMING_FILE, timing)
    click.echo(_table(rows, ("seed",) + EVAL_COLUMNS))
    click.echo(_table([dict(seed="mean", **doc["aggregate"])],
                      ("seed",) + EVAL_COLUMNS))


@main.command()
@click.argument("kind", type=click.Choice(["model", "trace", "dataset"]))
@click.argument("path", type=click.Path(path_type=Path))
@click.option("--domain", type=click.Choice(DOMAINS), default=None,
              help="Domain for parsing a model directory.")
def inspect(kind: str, path: Path, domain: Optional[str]) -> None:
    """Print a model, iteration trace or dataset summary."""
    if not path.exists():
        raise click.BadParameter(f"{path} does not exist",
                                 param_hint="PATH")
    if kind == "model":
        mdir = path if path.is_dir() else path.parent
        if domain is not None:
            spec = make_domain(domain)[0]
            table, hlas = load_model(mdir, spec)
            click.echo("\n\n".join(pretty(table[n])
                                   for n in _decl_order(table)))
            click.echo()
            click.echo(format_model(hlas), nl=False)
        else:
            ops = mdir / OPERATORS_FILE if path.is_dir() else path
            click.echo(ops.read_text(encoding="utf-8"), nl=False)
        return
    f = path / (TRACE_FILE if kind == "trace" else DATASET_FILE) \
        if path.is_dir() else path
    records = [json.loads(line) for line in
               f.read_text(encoding="utf-8").splitlines() if line.strip()]
    if kind == "trace":
        rows = [{**r, "proposed": int(r["proposed"]),
                 "psi": ",".join(r["psi"])} for r in records]
        click.echo(_table(rows, ("i", "rho", "nu", "n_psi", "n_candidates",
                                 "proposed", "n_operators", "psi")))
        return
    pos = sum(1 for r in records if r["ok"])
    click.echo(f"{pos} positives, {len(records) - pos} negatives")
    per: Dict[str, List[int]] = {}
    for r in records:
        name = r["skill"].split("(")[0]
        per.setdefault(name, [0, 0])[0 if r["ok"] else 1] += 1
    rows = [{"skill": k, "positives": v[0], "negatives": v[1]}
            for k, v in sorted(per.items())]
    if rows:
        click.echo(_table(rows, ("skill", "positives", "negatives")))


@main.command()
@click.argument("runs", nargs=-1, required=True,
                type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", default=None,
              type=click.Path(file_okay=False, path_type=Path),
              help="Figure directory (default: the first run's).")
def report(runs: Tuple[Path, ...], out_dir: Optional[Path]) -> None:
    """Summarize run directories and render figures."""
    from predinv.plotting import render_report
    docs = []
    for r in runs:
        f = r / METRICS_FILE if r.is_dir() else r
        if not f.is_file():
            raise click.BadParameter(f"no {METRICS_FILE} in {r}",
                                     param_hint="RUNS")
        docs.append(json.loads(f.read_text(encoding="utf-8")))
    target = out_dir or (runs[0] if runs[0].is_dir() else runs[0].parent)
    rows = []
    for d in docs:
        rows.append({"domain": d["domain"], "model": d["model"],
                     "seeds": len(d["seeds"]), **d["aggregate"]})
    click.echo(_table(rows, ("domain", "model", "seeds") + EVAL_COLUMNS))
    for path in render_report(docs, target):
        click.echo(f"figure\t{path}")
