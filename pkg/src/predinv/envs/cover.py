"""Cover and Cover Heavy: pick blocks and place them over targets on a 1-D
table.  In Cover Heavy, red blocks are too heavy to lift."""

from __future__ import annotations

import random
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from predinv.core import Environment, FeatureState, GroundSkill, ObjectRef, \
    Task
from predinv.envs.spec import DomainSpec, atom, build_state


def _holder(state: FeatureState) -> Optional[ObjectRef]:
    for rel, args in state.facts:
        if rel == "holding":
            return args[1]
    return None


class CoverEnv(Environment):
    def __init__(self, spec: DomainSpec, heavy: bool = False) -> None:
        super().__init__(list(spec.skills.values()))
        self.heavy = heavy

    def _robot(self, state: FeatureState) -> ObjectRef:
        return next(o for o in state.objects if o.type.name == "robot")

    def _step(self, state: FeatureState,
              skill: GroundSkill) -> Optional[FeatureState]:
        robot = self._robot(state)
        held = _holder(state)
        if skill.name == "Pick":
            (block,) = skill.args
            if held is not None or state.get(robot, "fingers") <= 0.5:
                return None
            if self.heavy and ("red", (block,)) in state.facts:
                return None
            return state.copy_with(
                {robot: {"fingers": 0.0}, block: {"held": 1.0}},
                facts=state.facts | {("holding", (robot, block))})
        if skill.name == "Place":
            block, target = skill.args
            if held != block:
                return None
            width = state.get(block, "hi") - state.get(block, "lo")
            mid = (state.get(target, "lo") + state.get(target, "hi")) / 2
            return state.copy_with(
                {robot: {"fingers": 1.0},
                 block: {"held": 0.0, "lo": mid - width / 2,
                         "hi": mid + width / 2}},
                facts=state.facts - {("holding", (robot, block))})
        return None


def _layout(rng: random.Random, widths: Sequence[float]
            ) -> List[Tuple[float, float]]:
    """Non-overlapping intervals with the given widths inside [0, 1]."""
    while True:
        order = list(range(len(widths)))
        rng.shuffle(order)
        slack = 1.0 - sum(widths)
        gaps = sorted(rng.uniform(0, slack) for _ in widths)
        out: Dict[int, Tuple[float, float]] = {}
        pos = 0.0
        prev = 0.0
        for i, g in zip(order, gaps):
            pos += g - prev
            prev = g
            out[i] = (round(pos, 4), round(pos + widths[i], 4))
            pos += widths[i]
        ivs = [out[i] for i in range(len(widths))]
        ordered = sorted(ivs)
        if all(b[0] - a[1] > 0.01 for a, b in zip(ordered, ordered[1:])):
            return ivs


def sample_task(spec: DomainSpec, rng: random.Random,
                params: Mapping[str, Any], task_id: int) -> Task:
    heavy = spec.name == "cover_heavy"
    nb, nt = int(params["blocks"]), int(params["targets"])
    robot = spec.objects("robot", 0, 1)[0]
    blocks = spec.objects("block", 1, nb)
    targets = spec.objects("target", 1 + nb, nt)
    bw = [round(rng.uniform(0.04, 0.07), 4) for _ in blocks]
    tw = [round(rng.uniform(0.10, 0.14), 4) for _ in targets]
    ivs = _layout(rng, bw + tw)
    red = {b for b in blocks if rng.random() < 0.5}
    impossible = heavy and rng.random() < float(params.get("impossible", 0))
    if heavy and not impossible and len(red) == nb:
        red.discard(rng.choice(blocks))
    if heavy and impossible and not red:
        red.add(rng.choice(blocks))
    # The goal pairs distinct blocks with distinct targets.
    k = rng.randint(1, min(int(params.get("max_goal", 2)), nb, nt))
    light = [b for b in blocks if b not in red] if heavy else list(blocks)
    if heavy and impossible:
        first = [rng.choice(sorted(red))]
        rest = [b for b in blocks if b != first[0]]
        goal_blocks = first + rng.sample(rest, k - 1)
    else:
        goal_blocks = rng.sample(light, min(k, len(light)))
    goal_targets = rng.sample(targets, len(goal_blocks))
    held = None
    if rng.random() < float(params.get("start_held", 0.0)) and light:
        held = rng.choice(light)
    feats: Dict[ObjectRef, Dict[str, float]] = {
        robot: {"fingers": 0.0 if held else 1.0}}
    for b, (lo, hi) in zip(blocks, ivs[:nb]):
        feats[b] = {"lo": lo, "hi": hi, "held": 1.0 if b == held else 0.0}
    for t, (lo, hi) in zip(targets, ivs[nb:]):
        feats[t] = {"lo": lo, "hi": hi}
    facts = {("red" if b in red else "green", (b,)) for b in blocks}
    if held is not None:
        facts.add(("holding", (robot, held)))
    init = build_state(feats, facts)
    goal = frozenset(atom("Covers", b, t)
                     for b, t in zip(goal_blocks, goal_targets))
    return Task(init.objects, init, goal, task_id, impossible)
