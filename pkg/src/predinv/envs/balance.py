"""Balance: distribute blocks across two plates so the machine will start.

The machine's switch only works when both plates carry the same number of
blocks; otherwise TurnMachineOn fails.
"""

from __future__ import annotations

import random
from typing import Any, Dict, List, Mapping, Optional, Set

from predinv.core import Environment, FeatureState, GroundSkill, ObjectRef, \
    Task
from predinv.envs.spec import DomainSpec, atom, build_state


def _stacks(state: FeatureState) -> Dict[ObjectRef, List[ObjectRef]]:
    """Bottom-to-top block list per plate."""
    above = {args[1]: args[0] for rel, args in state.facts if rel == "on"}
    out = {}
    for p in state.objects:
        if p.type.name != "plate":
            continue
        base = [args[0] for rel, args in state.facts
                if rel == "on_plate" and args[1] == p]
        tower = list(base)
        while tower and tower[-1] in above:
            tower.append(above[tower[-1]])
        out[p] = tower
    return out


def plate_count(state: FeatureState, plate: ObjectRef) -> int:
    return len(_stacks(state)[plate])


def _facts(state: FeatureState, stacks: Mapping[ObjectRef, List[ObjectRef]]
           ) -> Set:
    facts = {f for f in state.facts
             if f[0] not in ("on", "on_plate", "clear", "plate_clear")}
    for p, tower in stacks.items():
        if not tower:
            facts.add(("plate_clear", (p,)))
            continue
        facts.add(("on_plate", (tower[0], p)))
        for lower, upper in zip(tower, tower[1:]):
            facts.add(("on", (upper, lower)))
        facts.add(("clear", (tower[-1],)))
    return facts


class BalanceEnv(Environment):
    def __init__(self, spec: DomainSpec) -> None:
        super().__init__(list(spec.skills.values()))

    def _held(self, state: FeatureState) -> Optional[ObjectRef]:
        for o in state.objects:
            if o.type.name == "block" and state.get(o, "held") > 0.5:
                return o
        return None

    def _step(self, state: FeatureState,
              skill: GroundSkill) -> Optional[FeatureState]:
        robot = skill.args[0]
        held = self._held(state)
        stacks = _stacks(state)
        if skill.name == "Pick":
            block = skill.args[1]
            if held is not None or state.get(robot, "fingers") <= 0.5:
                return None
            tops = {t[-1]: p for p, t in stacks.items() if t}
            if block not in tops:
                return None
            stacks[tops[block]] = stacks[tops[block]][:-1]
            return state.copy_with(
                {robot: {"fingers": 0.0}, block: {"held": 1.0}},
                facts=_facts(state, stacks))
        if skill.name == "Stack":
            target = skill.args[1]
            tops = {t[-1]: p for p, t in stacks.items() if t}
            if held is None or target not in tops:
                return None
            stacks[tops[target]] = stacks[tops[target]] + [held]
            return state.copy_with(
                {robot: {"fingers": 1.0}, held: {"held": 0.0}},
                facts=_facts(state, stacks))
        if skill.name == "PutOnPlate":
            plate = skill.args[1]
            if held is None or stacks[plate]:
                return None
            stacks[plate] = [held]
            return state.copy_with(
                {robot: {"fingers": 1.0}, held: {"held": 0.0}},
                facts=_facts(state, stacks))
        if skill.name == "TurnMachineOn":
            p1, p2 = skill.args[1], skill.args[2]
            if p1 == p2 or len(stacks[p1]) != len(stacks[p2]):
                return None
            machines = [o for o in state.objects
                        if o.type.name == "machine"]
            return state.copy_with({m: {"on": 1.0} for m in machines})
        return None


def sample_task(spec: DomainSpec, rng: random.Random,
                params: Mapping[str, Any], task_id: int) -> Task:
    n = rng.choice(list(params["blocks"]))
    robot = spec.objects("robot", 0, 1)[0]
    machine = spec.objects("machine", 1, 1)[0]
    plates = spec.objects("plate", 2, 2)
    blocks = spec.objects("block", 4, n)
    k = rng.choice([i for i in range(n + 1) if 2 * i != n])
    order = list(blocks)
    rng.shuffle(order)
    stacks = {plates[0]: order[:k], plates[1]: order[k:]}
    feats: Dict[ObjectRef, Dict[str, float]] = {
        robot: {"fingers": 1.0}, machine: {"on": 0.0}}
    for i, p in enumerate(plates):
        feats[p] = {"x": 0.25 + 0.5 * i}
    for b in blocks:
        feats[b] = {"held": 0.0}
    base = build_state(feats)
    facts = _facts(base, stacks)
    for b in blocks:
        if rng.random() < 0.5:
            facts.add(("red", (b,)))
    init = base.copy_with(facts=facts)
    return Task(init.objects, init, frozenset({atom("MachineOn", machine)}),
                task_id)
