"""Deterministic perceptual oracle answering natural-language assertions from
the scene graph, with context conditioning for occluded facts."""

from __future__ import annotations

import enum
import hashlib
import logging
import random
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Mapping, Optional, Sequence, Tuple

from predinv.core import FeatureState, GroundAtom, GroundSkill, ObjectRef

logger = logging.getLogger(__name__)


class OracleAnswer(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class AssertionQuery:
    template: str
    args: Tuple[ObjectRef, ...]
    focus: FrozenSet[ObjectRef] = frozenset()

    def __post_init__(self) -> None:
        if not set(self.args) <= set(self.focus):
            object.__setattr__(self, "focus",
                               frozenset(self.focus) | frozenset(self.args))

    def text(self, labels: Optional[Mapping[ObjectRef, str]] = None) -> str:
        names = [labels[o] if labels else o.name for o in self.args]
        return self.template.format(*names)


@dataclass(frozen=True)
class PerceptionContext:
    """What happened immediately before the current observation."""
    prev_skill: Optional[GroundSkill] = None
    prev_state: Optional[FeatureState] = None
    prev_atoms: Optional[Mapping[GroundAtom, bool]] = None


EMPTY_CONTEXT = PerceptionContext()


@dataclass(frozen=True)
class NominalEffect:
    """A skill's declared effect on one relation, by skill-argument index."""
    relation: str
    arg_positions: Tuple[int, ...]
    value: bool


@dataclass(frozen=True)
class AssertionRegistry:
    templates: Mapping[str, str] = field(default_factory=dict)
    nominal_effects: Mapping[str, Tuple[NominalEffect, ...]] = \
        field(default_factory=dict)

    def relation(self, template: str) -> Optional[str]:
        return self.templates.get(template)


@dataclass(frozen=True)
class PerceiverConfig:
    noise: float = 0.0
    seed: int = 0


class Perceiver:
    """Answers assertions about object subsets from ground-truth facts."""

    def __init__(self, registry: AssertionRegistry,
                 config: PerceiverConfig = PerceiverConfig()) -> None:
        self.registry = registry
        self.config = config
        self.calls = 0

    def answer(self, q: AssertionQuery, state: FeatureState) -> OracleAnswer:
        """Raw scene-graph answer without context resolution or noise."""
        relation = self.registry.relation(q.template)
        if relation is None:
            logger.debug("unknown assertion template %r", q.template)
            return OracleAnswer.FALSE
        fact = (relation, tuple(q.args))
        if not set(q.args) <= q.focus:
            return OracleAnswer.FALSE
        if fact in state.occluded:
            return OracleAnswer.UNKNOWN
        return OracleAnswer.TRUE if fact in state.facts \
            else OracleAnswer.FALSE

    def evaluate_assertion(self, q: AssertionQuery, state: FeatureState,
                           ctx: Optional[PerceptionContext] = None,
                           atom: Optional[GroundAtom] = None) -> bool:
        self.calls += 1
        raw = self.answer(q, state)
        if raw is OracleAnswer.UNKNOWN:
            value = self._resolve(q, ctx or EMPTY_CONTEXT, atom)
        else:
            value = raw is OracleAnswer.TRUE
        if self.config.noise > 0 and self._flip(q, state):
            value = not value
        return value

    def _resolve(self, q: AssertionQuery, ctx: PerceptionContext,
                 atom: Optional[GroundAtom]) -> bool:
        relation = self.registry.relation(q.template)
        skill = ctx.prev_skill
        if skill is not None:
            for eff in self.registry.nominal_effects.get(skill.name, ()):
                if eff.relation != relation:
                    continue
                if tuple(skill.args[i] for i in eff.arg_positions) == q.args:
                    return eff.value
        if ctx.prev_atoms is not None and atom is not None \
                and atom in ctx.prev_atoms:
            return ctx.prev_atoms[atom]
        return False

    def _flip(self, q: AssertionQuery, state: FeatureState) -> bool:
        key = "|".join([str(self.config.seed), str(state.step_index),
                        q.template, ",".join(str(o.id) for o in q.args)])
        digest = hashlib.sha256(key.encode()).digest()
        rng = random.Random(int.from_bytes(digest[:8], "big"))
        return rng.random() < self.config.noise


def label_objects(state_or_objects) -> Dict[ObjectRef, str]:
    """Display labels ``<type><id>``, unique because ids are."""
    objs: Sequence[ObjectRef] = (state_or_objects.objects
                                 if isinstance(state_or_objects, FeatureState)
                                 else state_or_objects)
    return {o: f"{o.type.name}{o.id}" for o in objs}
