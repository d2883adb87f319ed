import json

import pytest
from click.testing import CliRunner

from predinv.cli import main


def _invoke(*args):
    return CliRunner().invoke(main, list(args), catch_exceptions=False)


@pytest.fixture(scope="module")
def cover_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("cover")
    res = _invoke("run", "--domain", "cover", "--seed", "0", "--out",
                  str(out))
    assert res.exit_code == 0, res.output
    return out, res.output


def test_run_writes_artifacts(cover_run):
    out, stdout = cover_run
    doc = json.loads((out / "metrics.json").read_text())
    assert doc["seeds"][0]["eval"]["solve_rate"] == 1.0
    assert "aggregate" in doc and "solve_rate" in doc["aggregate"]
    for f in ("predicates.nsp", "operators.txt", "trace.jsonl",
              "dataset.jsonl"):
        assert (out / "seed0" / f).is_file()
    assert "NSRT-Op0:" in (out / "seed0" / "operators.txt").read_text()
    timing = json.loads((out / "timing.json").read_text())
    assert timing["0"]["learn_s"] >= 0
    header = stdout.splitlines()[0].split("\t")
    assert header[:2] == ["seed", "solve_rate"]


def test_metrics_byte_identical(cover_run, tmp_path):
    out, _ = cover_run
    res = _invoke("run", "--domain", "cover", "--seed", "0", "--out",
                  str(tmp_path))
    assert res.exit_code == 0
    assert (out / "metrics.json").read_bytes() == \
        (tmp_path / "metrics.json").read_bytes()


def test_eval_learned_model(cover_run):
    out, _ = cover_run
    res = _invoke("eval", "--domain", "cover", "--model",
                  f"learned:{out / 'seed0'}")
    assert res.exit_code == 0
    row = res.output.splitlines()[1].split("\t")
    assert float(row[1]) == 1.0


def test_coffee_default_budget(tmp_path):
    res = _invoke("eval", "--domain", "coffee", "--model", "oracle",
                  "--out", str(tmp_path))
    assert res.exit_code == 0
    doc = json.loads((tmp_path / "metrics.json").read_text())
    assert doc["config"]["n_abstract"] == 100


def test_seeds_aggregate(tmp_path):
    res = _invoke("eval", "--domain", "cover", "--model", "initial",
                  "--seeds", "2", "--out", str(tmp_path))
    assert res.exit_code == 0
    doc = json.loads((tmp_path / "metrics.json").read_text())
    rates = [s["eval"]["solve_rate"] for s in doc["seeds"]]
    assert [s["seed"] for s in doc["seeds"]] == [0, 1]
    assert doc["aggregate"]["solve_rate"] == pytest.approx(sum(rates) / 2)


@pytest.mark.parametrize("args", [
    ["run", "--domain", "nope"],
    ["eval", "--domain", "cover", "--model", "learned:/nonexistent"],
    ["eval", "--domain", "cover", "--model", "bogus"],
    ["run", "--domain", "cover", "--proposer", "carrier-pigeon"],
    ["run", "--domain", "cover", "--alpha", "x"],
    ["inspect", "trace", "/nonexistent"],
])
def test_usage_errors_exit_2(args):
    res = CliRunner().invoke(main, args)
    assert res.exit_code == 2


def test_unparsable_model_exits_2(tmp_path):
    (tmp_path / "predicates.nsp").write_text("(primitive")
    (tmp_path / "operators.txt").write_text("")
    res = CliRunner().invoke(main, ["eval", "--domain", "cover", "--model",
                                    f"learned:{tmp_path}"])
    assert res.exit_code == 2


def test_runtime_failure_exits_1(tmp_path, monkeypatch):
    from predinv import cli
    from predinv.core import PredinvError

    def boom(*a, **k):
        raise PredinvError("simulator fell over")
    monkeypatch.setattr(cli, "evaluate", boom)
    res = CliRunner().invoke(main, ["eval", "--domain", "cover", "--model",
                                    "oracle"])
    assert res.exit_code == 1


def test_inspect_views(cover_run, tmp_path):
    out, _ = cover_run
    res = _invoke("inspect", "model", str(out / "seed0"), "--domain",
                  "cover")
    assert "Parameters:" in res.output and "Add Effects:" in res.output
    res = _invoke("inspect", "trace", str(out / "seed0"))
    assert res.output.splitlines()[0].startswith("i\trho\tnu")
    res = _invoke("inspect", "dataset", str(out / "seed0"))
    assert "positives" in res.output.splitlines()[0]
    empty = tmp_path / "dataset.jsonl"
    empty.write_text("")
    res = _invoke("inspect", "dataset", str(empty))
    assert res.output.strip() == "0 positives, 0 negatives"


def test_export_pddl(tmp_path):
    res = _invoke("run", "--domain", "cover", "--out", str(tmp_path),
                  "--export-pddl", "--max-iters", "3")
    assert res.exit_code == 0
    assert (tmp_path / "seed0" / "pddl" / "domain.pddl").is_file()


def test_report_renders_figures(cover_run, tmp_path):
    out, _ = cover_run
    res = _invoke("report", str(out), "--out", str(tmp_path))
    assert res.exit_code == 0
    assert (tmp_path / "eval_summary.png").stat().st_size > 0
    assert (tmp_path / "learning_curves.png").stat().st_size > 0
