import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from predinv.core import GroundSkill
from predinv.data import AbstractTransition
from predinv.learner import (EXHAUSTIVE_LIMIT, assemble_model,
                             classification_score, cluster_effects,
                             intersection_preconditions, learn_hlas,
                             learn_preconditions, plan_consistent,
                             RecordedPlan, score_predicate_set,
                             select_predicates, with_context)
from predinv.worldmodel import HLA, LiftedAtom

from _support import atom, objects, primitive_table, skill

ALPHAS = [Fraction(-1, 100), Fraction(-1, 10), Fraction(-1, 3), Fraction(0)]
PREDS_7A = {"U0": 1, "U1": 1, "U2": 1, "B0": 2, "E": 1}


def _all_atoms(preds, objs):
    out = []
    for p, k in sorted(preds.items()):
        for args in itertools.product(objs, repeat=k):
            out.append(atom(p, *args))
    return out


@st.composite
def transitions(draw, preds, effect_preds, max_n=10):
    """Transitions of one two-argument skill over 2-4 objects.

    Successes either add ``E(a)`` or delete ``U0(b)``, or (for the scorer
    instances) toggle random atoms over the skill arguments.
    """
    objs = objects(draw(st.integers(2, 4)))
    universe = _all_atoms(preds, objs)
    sk = skill()
    n = draw(st.integers(1, max_n))
    out = []
    for _ in range(n):
        a, b = draw(st.permutations(objs).map(lambda p: p[:2]))
        pre = frozenset(x for x in universe if draw(st.booleans()))
        ok = draw(st.booleans())
        post = None
        if ok:
            if effect_preds is None:
                kind = draw(st.sampled_from(["add", "del"]))
                if kind == "add":
                    pre = pre - {atom("E", a)}
                    post = pre | {atom("E", a)}
                else:
                    pre = pre | {atom("U0", b)}
                    post = pre - {atom("U0", b)}
            else:
                local = [x for x in universe if set(x.args) <= {a, b}
                         and x.predicate in effect_preds]
                flips = {x for x in local if draw(st.integers(0, 3)) == 0}
                post = pre ^ flips
        out.append(AbstractTransition(GroundSkill(sk, (a, b)), pre, post,
                                      objs))
    return out


# ------------------------------------------------------------ oracle for J

def _lift(ground, a, b):
    names = {a: "?x0", b: "?x1"}
    if not set(ground.args) <= set(names):
        return None
    return LiftedAtom(ground.predicate, tuple(names[o] for o in ground.args))


def _grounded(lifted, a, b):
    sub = {"?x0": a, "?x1": b}
    return {atom(x.predicate, *(sub[v] for v in x.vars)) for x in lifted}


def _effect_key(d):
    a, b = d.skill.args
    add = frozenset(_lift(x, a, b) for x in d.post - d.pre)
    dele = frozenset(_lift(x, a, b) for x in d.pre - d.post)
    return add, dele


def brute_force_pre(members, others, alpha):
    """Exhaustive maximum of J over subsets of the shared atoms, ties to
    the smaller set and then the lexicographically first index tuple."""
    common = None
    for d in members:
        a, b = d.skill.args
        lifted = {_lift(x, a, b) for x in d.pre} - {None}
        common = lifted if common is None else common & lifted
    cands = sorted(common)
    n = len(members) + len(others)
    best = None
    for size in range(len(cands) + 1):
        for idx in itertools.combinations(range(len(cands)), size):
            pre = {cands[i] for i in idx}
            ok = sum(_grounded(pre, *d.skill.args) <= d.pre for d in members)
            ok += sum(not _grounded(pre, *d.skill.args) <= d.pre
                      for d in others)
            j = Fraction(ok, n) + alpha * size
            if best is None or j > best[0]:
                best = (j, frozenset(pre))
    return best, cands


@settings(max_examples=200, deadline=None, derandomize=True)
@given(data=transitions(PREDS_7A, None), alpha=st.sampled_from(ALPHAS))
def test_preconditions_match_exhaustive_optimum(data, alpha):
    parts = cluster_effects(data)
    for p in parts:
        members = [data[i] for i, _ in p.members]
        ids = {i for i, _ in p.members}
        others = [d for i, d in enumerate(data) if i not in ids]
        res = learn_preconditions(p, data, alpha)
        assert len(res.candidates) <= EXHAUSTIVE_LIMIT
        (j, pre), cands = brute_force_pre(members, others, alpha)
        assert list(res.candidates) == cands
        assert res.exhaustive
        assert res.objective == j
        assert res.pre == pre


# ------------------------------------------------------------ scorer oracle

PREDS_7B = {"P0": 1, "P1": 1, "Q0": 2, "Q1": 2, "P2": 1}


def brute_force_score(names, data, alpha, alpha_sel):
    names = frozenset(names)
    view = [AbstractTransition(
        d.skill, frozenset(x for x in d.pre if x.predicate in names),
        None if d.post is None else frozenset(
            x for x in d.post if x.predicate in names), d.objects)
        for d in data]
    if not view:
        return Fraction(1) + alpha_sel * len(names)
    groups = {}
    for d in view:
        if d.ok:
            groups.setdefault(_effect_key(d), []).append(d)
    model = []
    for key, members in groups.items():
        others = [d for d in view if not (d.ok and _effect_key(d) == key)]
        (_, pre), _ = brute_force_pre(members, others, alpha)
        model.append(pre)
    correct = 0
    for d in view:
        hit = any(_grounded(pre, *d.skill.args) <= d.pre for pre in model)
        correct += hit == d.ok
    return Fraction(correct, len(view)) + alpha_sel * len(names)


@settings(max_examples=200, deadline=None, derandomize=True)
@given(data=transitions(PREDS_7B, {"P0", "P1", "Q0", "P2"}),
       names=st.sets(st.sampled_from(sorted(PREDS_7B)), max_size=5),
       alpha=st.sampled_from(ALPHAS),
       alpha_sel=st.sampled_from([Fraction(-1, 100), Fraction(-1, 20)]))
def test_score_matches_brute_force(data, names, alpha, alpha_sel):
    table = primitive_table(PREDS_7B)
    got = score_predicate_set(names, data, table, alpha, alpha_sel)
    assert got == brute_force_score(names, data, alpha, alpha_sel)


# ------------------------------------------------------------ examples

def _coffee_like():
    """Pour succeeds whenever the jug is held and filled; the machine is
    the one object of its type, and the jug sat in it in every success."""
    from predinv.core import ObjectType, ObjectRef, SkillSpec
    robot, jug, cup, mach = (ObjectType(n) for n in
                             ("robot", "jug", "cup", "machine"))
    r, j, c, m = (ObjectRef(i, n, t) for i, (n, t) in enumerate(
        [("r", robot), ("j", jug), ("c", cup), ("m", mach)]))
    pour = SkillSpec("Pour", (robot, jug, cup))
    held, filled, inm = (atom("Holding", r, j), atom("Filled", j),
                         atom("InMachine", j, m))
    done = atom("CupFilled", c)
    objs = (r, j, c, m)
    g = GroundSkill(pour, (r, j, c))
    data = [
        AbstractTransition(g, frozenset({held, filled, inm}),
                           frozenset({held, filled, inm, done}), objs),
        AbstractTransition(g, frozenset({held, filled, inm}),
                           frozenset({held, filled, inm, done}), objs),
        AbstractTransition(g, frozenset({held}), None, objs),
        AbstractTransition(g, frozenset({filled, inm}), None, objs),
    ]
    return data


def test_optimistic_drops_context_atom_intersection_keeps_it():
    from predinv.dsl import parse, typecheck
    from predinv.core import ObjectType
    data = _coffee_like()
    types = {n: ObjectType(n) for n in ("robot", "jug", "cup", "machine")}
    table = typecheck(parse("""
        (primitive Holding (?r robot ?j jug) (assert "{0} h {1}" ?r ?j))
        (primitive Filled (?j jug) (assert "{0} f" ?j))
        (primitive InMachine (?j jug ?m machine) (assert "{0} m {1}" ?j ?m))
        (primitive CupFilled (?c cup) (assert "{0} c" ?c))"""), types)
    (opt,) = learn_hlas(data, table)
    (base,) = learn_hlas(data, table, method="intersection")
    assert {a.predicate for a in opt.pre} == {"Holding", "Filled"}
    assert "InMachine" in {a.predicate for a in base.pre}
    assert len(opt.params) == 3 and len(base.params) == 4


def test_with_context_adds_unique_objects_only():
    data = _coffee_like()
    (p,) = cluster_effects(data)
    q = with_context(p, data)
    assert [t for _, t in q.params[len(p.params):]] == ["machine"]
    assert all(len(b) == len(q.params) for _, b in q.members)


def test_intersection_keeps_all_shared_atoms():
    data = _coffee_like()
    (p,) = cluster_effects(data)
    res = intersection_preconditions(p, data)
    assert {a.predicate for a in res.pre} == {"Holding", "Filled"}


def test_classification_score_empty_data_is_one():
    assert classification_score([], []) == 1


def test_assemble_keeps_unseen_initial_operators():
    sk = skill()
    h = HLA("Init", (("?a", "obj"), ("?b", "obj")), sk, ("?a", "?b"),
            add=frozenset({LiftedAtom("E", ("?a",))}))
    table = primitive_table({"E": 1})
    assert assemble_model([], [h], table) == [h]
    learned = HLA("Op0", (("?a", "obj"), ("?b", "obj")), sk, ("?a", "?b"),
                  add=frozenset({LiftedAtom("E", ("?b",))}))
    assert assemble_model([learned], [h], table) == [learned]


def test_plan_consistency_checks_goal():
    sk = skill()
    h = HLA("Op0", (("?a", "obj"), ("?b", "obj")), sk, ("?a", "?b"),
            add=frozenset({LiftedAtom("E", ("?a",))}))
    table = primitive_table({"E": 1})
    o = objects(2)
    plan = RecordedPlan(0, (GroundSkill(sk, o),), frozenset(),
                        frozenset({atom("E", o[0])}), o)
    assert plan_consistent(plan, [h], table)
    wrong = RecordedPlan(0, (GroundSkill(sk, o),), frozenset(),
                         frozenset({atom("E", o[1])}), o)
    assert not plan_consistent(wrong, [h], table)


def test_selection_adds_predicates_only_when_score_improves():
    table = primitive_table(PREDS_7A)
    o = objects(3)
    sk = skill()
    data = []
    for a, b in itertools.permutations(o, 2):
        ok = a != o[0]
        pre = frozenset({atom("U1", a)} if ok else set())
        post = pre | {atom("E", a)} if ok else None
        data.append(AbstractTransition(GroundSkill(sk, (a, b)), pre, post,
                                       o))
    picked = select_predicates(table, data, ["E"])
    assert "U1" in picked.names
    assert "U2" not in picked.names


def test_unknown_method_rejected():
    with pytest.raises(ValueError):
        learn_hlas(_coffee_like(), primitive_table({"E": 1}),
                   method="nope")
