import pytest

from predinv.abstraction import abstract
from predinv.envs import DOMAINS, UnknownDomain, make_domain
from predinv.perceiver import Perceiver


@pytest.mark.parametrize("domain", DOMAINS)
def test_generation_is_seeded(domain):
    _, _, a = make_domain(domain, 3)
    _, _, b = make_domain(domain, 3)
    _, _, c = make_domain(domain, 4)
    ta, tb, tc = a.test(), b.test(), c.test()
    assert [t.init.key() for t in ta] == [t.init.key() for t in tb]
    assert [t.init.key() for t in ta] != [t.init.key() for t in tc]
    assert len(ta) == 50


@pytest.mark.parametrize("domain", DOMAINS)
def test_goals_use_goal_predicates(domain):
    spec, _, gen = make_domain(domain)
    for t in gen.train() + gen.test():
        assert t.goal
        assert {a.predicate for a in t.goal} <= set(spec.goal_predicates)


@pytest.mark.parametrize("domain", DOMAINS)
def test_shipped_models_typecheck(domain):
    spec, _, _ = make_domain(domain)
    for h in spec.oracle_hlas:
        h.check_against(spec.oracle_table)
    for h in spec.initial_hlas:
        h.check_against(spec.initial_table)


def test_budgets():
    assert make_domain("coffee")[0].n_abstract == 100
    assert make_domain("cover")[0].n_abstract == 8


def test_balance_eval_sizes():
    _, _, gen = make_domain("balance")
    sizes = {sum(o.type.name == "block" for o in t.objects)
             for t in gen.test()}
    assert sizes <= {4, 5, 6} and len(sizes) > 1


def test_cover_heavy_has_impossible_tasks():
    _, _, gen = make_domain("cover_heavy")
    assert any(t.impossible for t in gen.test())
    assert not any(t.impossible for t in make_domain("cover")[2].test())


def test_unknown_domain():
    with pytest.raises(UnknownDomain):
        make_domain("nope")


@pytest.mark.parametrize("domain", DOMAINS)
def test_initial_states_do_not_satisfy_goals(domain):
    spec, _, gen = make_domain(domain)
    p = Perceiver(spec.registry)
    unsolved = 0
    for t in gen.test():
        s = abstract(t.init, spec.oracle_table, p)
        unsolved += not t.goal <= s.atoms
    assert unsolved >= 45
