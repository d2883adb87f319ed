import pytest

from predinv.core import (ArityMismatch, Failure, NoActiveTask, ObjectRef,
                          ObjectType, Success, TypeMismatch, ground_skill)
from predinv.envs import make_domain

from _support import OBJ, objects, skill


def test_object_ids_must_be_non_negative():
    with pytest.raises(ValueError):
        ObjectRef(-1, "bad", OBJ)


def test_duplicate_feature_names_rejected():
    with pytest.raises(ValueError):
        ObjectType("t", (("a", (0, 1)), ("a", (0, 1))))


def test_ground_skill_checks_arity_and_types():
    other = ObjectType("other")
    o = objects(2)
    assert ground_skill(skill(), o).args == o
    with pytest.raises(ArityMismatch):
        ground_skill(skill(), o[:1])
    with pytest.raises(TypeMismatch):
        ground_skill(skill(), (o[0], ObjectRef(5, "x", other)))


def test_environment_requires_active_task():
    _, env, _ = make_domain("cover")
    with pytest.raises(NoActiveTask):
        env.state


def test_failed_skill_leaves_state_unchanged():
    spec, env, gen = make_domain("cover")
    task = gen.test()[0]
    env.reset(task)
    block = next(o for o in task.objects if o.type.name == "block")
    target = next(o for o in task.objects if o.type.name == "target")
    place = spec.skills["Place"]
    held = [f for f in task.init.facts if f[0] == "holding"]
    if held:
        block = next(o for o in task.objects if o.type.name == "block"
                     and o != held[0][1][1])
    before = env.state
    assert isinstance(env.execute(ground_skill(place, (block, target))),
                      Failure)
    assert env.state is before


def test_successful_skill_advances_step_index():
    spec, env, gen = make_domain("cover")
    task = next(t for t in gen.test()
                if not any(f[0] == "holding" for f in t.init.facts))
    env.reset(task)
    block = next(o for o in task.objects if o.type.name == "block")
    res = env.execute(ground_skill(spec.skills["Pick"], (block,)))
    assert isinstance(res, Success)
    assert res.next.step_index == 1
    assert env.simulate(task.init, ground_skill(spec.skills["Pick"],
                                                (block,))).next is not None
    assert env.state == res.next
