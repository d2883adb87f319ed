"""Blocks: stack blocks into towers with a single gripper."""

from __future__ import annotations

import random
from typing import Any, Dict, List, Mapping, Optional, Sequence

from predinv.core import Environment, FeatureState, GroundSkill, ObjectRef, \
    Task
from predinv.envs.spec import DomainSpec, atom, build_state


def _gripped(state: FeatureState) -> Optional[ObjectRef]:
    for rel, args in state.facts:
        if rel == "gripping":
            return args[1]
    return None


def _below(state: FeatureState, block: ObjectRef) -> Optional[ObjectRef]:
    for rel, args in state.facts:
        if rel == "on" and args[0] == block:
            return args[1]
    return None


def _clear(state: FeatureState, block: ObjectRef) -> bool:
    return not any(rel == "on" and args[1] == block
                   for rel, args in state.facts)


class BlocksEnv(Environment):
    def __init__(self, spec: DomainSpec) -> None:
        super().__init__(list(spec.skills.values()))

    def _step(self, state: FeatureState,
              skill: GroundSkill) -> Optional[FeatureState]:
        robot = skill.args[0]
        held = _gripped(state)
        if skill.name == "Pick":
            block = skill.args[1]
            if held is not None or state.get(robot, "fingers") < 1:
                return None
            if not _clear(state, block):
                return None
            under = _below(state, block)
            facts = set(state.facts)
            if under is not None:
                facts.discard(("on", (block, under)))
            facts.add(("gripping", (robot, block)))
            return state.copy_with(
                {robot: {"fingers": 0.0}, block: {"held": 1.0, "z": 0.0}},
                facts=facts)
        if skill.name == "Stack":
            target = skill.args[1]
            if held is None or held == target or not _clear(state, target):
                return None
            facts = (set(state.facts) - {("gripping", (robot, held))}) | {
                ("on", (held, target))}
            return state.copy_with(
                {robot: {"fingers": 1.0},
                 held: {"held": 0.0, "x": state.get(target, "x"),
                        "z": state.get(target, "z") + 1}},
                facts=facts)
        if skill.name == "PutOnTable":
            if held is None:
                return None
            used = {round(state.get(b, "x"), 6) for b in state.objects
                    if b.type.name == "block" and b != held}
            slot = next(i / 10 for i in range(len(state.objects) + 1)
                        if round(i / 10, 6) not in used)
            return state.copy_with(
                {robot: {"fingers": 1.0},
                 held: {"held": 0.0, "x": slot, "z": 0.0}},
                facts=set(state.facts) - {("gripping", (robot, held))})
        return None


def _random_towers(rng: random.Random,
                   blocks: Sequence[ObjectRef]) -> List[List[ObjectRef]]:
    order = list(blocks)
    rng.shuffle(order)
    towers: List[List[ObjectRef]] = []
    for b in order:
        if towers and rng.random() < 0.5:
            rng.choice(towers).append(b)
        else:
            towers.append([b])
    return towers


def _tower_atoms(towers: Sequence[Sequence[ObjectRef]]):
    out = set()
    for t in towers:
        if len(t) < 2:
            continue
        out.add(atom("OnTable", t[0]))
        for lower, upper in zip(t, t[1:]):
            out.add(atom("On", upper, lower))
    return out


def sample_task(spec: DomainSpec, rng: random.Random,
                params: Mapping[str, Any], task_id: int) -> Task:
    n = rng.choice(list(params["blocks"]))
    robot = spec.objects("robot", 0, 1)[0]
    blocks = spec.objects("block", 1, n)
    init_towers = _random_towers(rng, blocks)
    init_atoms = _tower_atoms(init_towers) | {
        atom("OnTable", t[0]) for t in init_towers}
    while True:
        goal = frozenset(_tower_atoms(_random_towers(rng, blocks)))
        if goal and not goal <= init_atoms:
            break
    feats: Dict[ObjectRef, Dict[str, float]] = {robot: {"fingers": 1.0}}
    facts = set()
    for slot, tower in enumerate(init_towers):
        for z, b in enumerate(tower):
            feats[b] = {"x": slot / 10, "z": float(z), "held": 0.0}
            if z:
                facts.add(("on", (b, tower[z - 1])))
    for b in blocks:
        if rng.random() < 0.5:
            facts.add(("red", (b,)))
    init = build_state(feats, facts)
    return Task(init.objects, init, goal, task_id)
