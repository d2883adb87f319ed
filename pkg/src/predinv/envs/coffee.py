"""Coffee: twist the jug upright, put it in the machine, brew, and pour into
every cup.

The jug is picked and poured in place, so a jug taken from the machine is
still in it until placed elsewhere.  Whether the robot holds the jug cannot
be seen while the gripper is at the jug; those facts are occluded.
"""

from __future__ import annotations

import random
from typing import Any, Dict, Mapping, Optional

from predinv.core import Environment, FeatureState, GroundSkill, ObjectRef, \
    Task
from predinv.envs.spec import DomainSpec, atom, build_state

TILT = 0.1


class CoffeeEnv(Environment):
    def __init__(self, spec: DomainSpec) -> None:
        super().__init__(list(spec.skills.values()))

    def _step(self, state: FeatureState,
              skill: GroundSkill) -> Optional[FeatureState]:
        robot = skill.args[0]
        open_ = state.get(robot, "fingers") > 0.5
        name = skill.name
        if name == "TurnMachineOn":
            machine = skill.args[1]
            jugs = [args[0] for rel, args in state.facts
                    if rel == "in_machine" and args[1] == machine]
            if not jugs:
                return None
            return state.copy_with({j: {"filled": 1.0} for j in jugs})
        jug = skill.args[1]
        holding = ("holding", (robot, jug))
        at_jug = {holding}
        if name == "Twist":
            if not open_:
                return None
            return state.copy_with({jug: {"rot": 0.0}}, occluded=at_jug)
        if name == "PickJug":
            if not open_ or abs(state.get(jug, "rot")) > TILT:
                return None
            return state.copy_with({robot: {"fingers": 0.0}},
                                   facts=state.facts | {holding},
                                   occluded=at_jug)
        if name == "PlaceJugInMachine":
            machine = skill.args[2]
            if holding not in state.facts:
                return None
            facts = {f for f in state.facts
                     if f != holding and f[0] != "in_machine"}
            facts.add(("in_machine", (jug, machine)))
            return state.copy_with(
                {robot: {"fingers": 1.0},
                 jug: {"x": state.get(machine, "x")}},
                facts=facts, occluded=at_jug)
        if name == "Pour":
            cup = skill.args[2]
            if holding not in state.facts:
                return None
            updates = {}
            if state.get(jug, "filled") > 0.5:
                updates[cup] = {"filled": 1.0}
            return state.copy_with(updates, occluded=at_jug)
        return None


def sample_task(spec: DomainSpec, rng: random.Random,
                params: Mapping[str, Any], task_id: int) -> Task:
    n = rng.choice(list(params["cups"]))
    robot = spec.objects("robot", 0, 1)[0]
    jug = spec.objects("jug", 1, 1)[0]
    machine = spec.objects("coffee_machine", 2, 1)[0]
    cups = spec.objects("cup", 3, n)
    tilted = rng.random() < float(params.get("tilted", 0.5))
    feats: Dict[ObjectRef, Dict[str, float]] = {
        robot: {"fingers": 1.0},
        jug: {"x": round(rng.uniform(0.0, 0.3), 4),
              "rot": round(rng.uniform(0.3, 0.6), 4) if tilted else 0.0,
              "filled": 0.0},
        machine: {"x": 0.5},
    }
    for c in cups:
        feats[c] = {"x": round(rng.uniform(0.6, 1.0), 4), "filled": 0.0}
    init = build_state(feats)
    goal = frozenset(atom("CupFilled", c) for c in cups)
    return Task(init.objects, init, goal, task_id)
