from predinv.data import (Episode, Step, TransitionDataset, abstract_dataset,
                          restrict_dataset)
from predinv.envs import make_domain
from predinv.online import explore
from predinv.perceiver import Perceiver


def _data(domain="cover"):
    spec, env, gen = make_domain(domain)
    p = Perceiver(spec.registry)
    res = explore(spec.initial_table, spec.initial_hlas, env, gen.train(),
                  spec.n_abstract, p)
    data = TransitionDataset()
    data.extend(res.episodes)
    return spec, p, data


def test_empty_summary():
    assert TransitionDataset().summary() == "0 positives, 0 negatives"


def test_dataset_counts_match_abstraction():
    spec, p, data = _data()
    view = abstract_dataset(data, spec.oracle_table, p)
    pos = sum(d.ok for d in view)
    assert data.summary() == f"{pos} positives, {len(view) - pos} negatives"
    for d in view:
        if not d.ok:
            assert d.add == frozenset() and d.delete == frozenset()


def test_failed_step_keeps_state():
    spec, p, data = _data()
    for ep in data.episodes:
        for x, st in ep.states():
            if not st.ok:
                assert st.next is None


def test_restrict_keeps_only_named_predicates():
    spec, p, data = _data()
    view = restrict_dataset(abstract_dataset(data, spec.oracle_table, p),
                            {"Covers"})
    for d in view:
        assert {a.predicate for a in d.pre} <= {"Covers"}


def test_episode_objects():
    spec, _, gen = make_domain("cover")
    task = gen.train()[0]
    ep = Episode(task.task_id, task.init, ())
    assert ep.objects == task.init.objects
    assert isinstance(Step, type)
