from predinv.plotting import render_report

DOC = {"domain": "cover", "model": "learned",
       "aggregate": {"solve_rate": 0.5},
       "seeds": [{"seed": 0, "trace": [{"i": 1, "rho": 0.2, "nu": 3},
                                       {"i": 2, "rho": 1.0, "nu": 0}]}]}


def test_render_both_figures(tmp_path):
    paths = render_report([DOC], tmp_path)
    assert [p.name for p in paths] == ["eval_summary.png",
                                       "learning_curves.png"]
    assert all(p.read_bytes()[:4] == b"\x89PNG" for p in paths)


def test_eval_only_docs_skip_curves(tmp_path):
    doc = dict(DOC, model="oracle", seeds=[{"seed": 0}])
    paths = render_report([doc], tmp_path)
    assert [p.name for p in paths] == ["eval_summary.png"]
