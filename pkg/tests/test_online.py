import math

import pytest

from predinv.envs import make_domain
from predinv.online import (OnlineConfig, evaluate, explore, omega_summary,
                            run_online)
from predinv.perceiver import Perceiver
from predinv.proposer import ScriptedProposer

from _support import learned

DOMAINS = ["cover", "blocks", "coffee", "balance", "cover_heavy"]


class SpyProposer:
    """Wraps a proposer and records the round of every request."""

    def __init__(self, inner):
        self.inner = inner
        self.rounds = []

    def propose(self, req):
        self.rounds.append(req.iteration)
        return self.inner.propose(req)


def _key(rho, nu):
    return (rho, -nu)


@pytest.mark.parametrize("domain", DOMAINS)
def test_best_is_lexicographically_nondecreasing(domain):
    run = learned(domain)
    hist = run.result.state.best_history
    assert len(hist) == len(run.result.trace)
    for a, b in zip(hist, hist[1:]):
        assert _key(*a) <= _key(*b)
    best = max((_key(r.rho, r.nu), -r.i) for r in run.result.trace)
    assert _key(*hist[-1]) == best[0]


@pytest.mark.parametrize("domain", ["cover", "coffee"])
def test_gating_follows_previous_iteration(domain):
    spec, env, gen = make_domain(domain)
    spy = SpyProposer(ScriptedProposer.for_domain(spec))
    res = run_online(env, gen.train(), spec.initial_table, spec.initial_hlas,
                     spy, OnlineConfig(n_abstract=spec.n_abstract),
                     Perceiver(spec.registry))
    prev = (-math.inf, math.inf)
    expected = []
    for r in res.trace:
        if r.nu == 0:
            assert not r.proposed
            break
        cond = r.rho <= prev[0] or (r.rho == prev[0] and r.nu > prev[1])
        expected.append(cond)
        assert r.propose_condition == cond
        assert r.proposed == cond
        prev = (r.rho, r.nu)
    n_rounds = sum(expected)
    assert sorted(set(spy.rounds)) == list(range(n_rounds))
    assert len(spy.rounds) == 2 * n_rounds
    assert expected[0] is False


def test_trace_is_deterministic():
    def once():
        spec, env, gen = make_domain("cover")
        res = run_online(env, gen.train(), spec.initial_table,
                         spec.initial_hlas, ScriptedProposer.for_domain(spec),
                         OnlineConfig(), Perceiver(spec.registry))
        return [r.as_dict() for r in res.trace]
    assert once() == once()


def test_no_invalid_plans_during_learning():
    for d in DOMAINS:
        assert learned(d).result.invalid_plans == 0
        assert learned(d).evaluation.invalid_plans == 0


def test_iteration_cap():
    spec, env, gen = make_domain("blocks")
    res = run_online(env, gen.train(), spec.initial_table, spec.initial_hlas,
                     ScriptedProposer.for_domain(spec),
                     OnlineConfig(n_max_ite=1), Perceiver(spec.registry))
    assert len(res.trace) == 1
    assert res.budget_exhausted


def test_parallel_evaluation_matches_sequential():
    spec, env, gen = make_domain("blocks")
    p = Perceiver(spec.registry)
    tasks = gen.test()[:12]
    a = evaluate(spec.oracle_table, spec.oracle_hlas, env, tasks, 8, p)
    b = evaluate(spec.oracle_table, spec.oracle_hlas, env, tasks, 8, p,
                 workers=4, env_factory=lambda: make_domain("blocks")[1])
    assert a.as_dict() == b.as_dict()


def test_eval_metrics():
    spec, env, gen = make_domain("cover")
    p = Perceiver(spec.registry)
    tasks = gen.test()[:10]
    res = evaluate(spec.initial_table, spec.initial_hlas, env, tasks, 8, p)
    d = res.as_dict()
    assert d["n_tasks"] == 10
    assert 0 <= d["solve_rate"] <= 1
    used = sum(o.plans_executed for o in res.outcomes) / (8 * 10)
    assert d["plans_used"] == pytest.approx(used)


def test_impossible_task_counts_as_solved_without_plans():
    spec, env, gen = make_domain("cover_heavy")
    p = Perceiver(spec.registry)
    tasks = [t for t in gen.test() if t.impossible][:3]
    res = explore(spec.oracle_table, spec.oracle_hlas, env, tasks, 8, p)
    assert all(o.no_plan and o.solved for o in res.outcomes)
    assert res.nu == 0


def test_omega_summary_sorted():
    spec, _, _ = make_domain("blocks")
    s = omega_summary(spec.oracle_hlas)
    assert list(s) == sorted(s)
