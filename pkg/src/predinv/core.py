"""Foundational domain types: object types, objects, low-level states,
skills, tasks and the environment interface."""

from __future__ import annotations

import abc
from dataclasses import dataclass, field
from typing import (Dict, FrozenSet, Iterable, Mapping, Optional, Sequence,
                    Tuple)


class PredinvError(Exception):
    """Base class for all errors raised by this package."""


class SkillTypeError(PredinvError):
    """A skill was applied to arguments it cannot accept."""


class ArityMismatch(SkillTypeError):
    def __init__(self, skill: str, expected: int, got: int) -> None:
        super().__init__(f"{skill} expects {expected} argument(s), got {got}")
        self.expected = expected
        self.got = got


class TypeMismatch(SkillTypeError):
    def __init__(self, skill: str, position: int, expected: str,
                 got: str) -> None:
        super().__init__(
            f"{skill} argument {position} must be {expected}, got {got}")
        self.position = position


class NoActiveTask(PredinvError):
    """The environment was asked to execute before a reset."""


@dataclass(frozen=True)
class ObjectType:
    name: str
    feature_schema: Tuple[Tuple[str, Tuple[float, float]], ...] = ()

    def __post_init__(self) -> None:
        names = [f for f, _ in self.feature_schema]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate feature names in type {self.name}")

    @property
    def feature_names(self) -> Tuple[str, ...]:
        return tuple(f for f, _ in self.feature_schema)

    def feature_index(self, feature: str) -> int:
        return self.feature_names.index(feature)

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, order=True)
class ObjectRef:
    """An object in a task.  Ordered by id, which is unique within a task."""
    id: int
    name: str
    type: ObjectType = field(compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValueError("object ids must be non-negative")

    def is_instance(self, t: ObjectType) -> bool:
        return self.type.name == t.name

    def __str__(self) -> str:
        return self.name


Fact = Tuple[str, Tuple[ObjectRef, ...]]


@dataclass(frozen=True)
class FeatureState:
    """Low-level state: object features plus the scene graph the perceptual
    oracle answers from.

    ``facts`` are the true relational facts; ``occluded`` marks facts (true
    or not) whose truth the oracle cannot observe directly.
    """
    features: Mapping[ObjectRef, Tuple[float, ...]]
    facts: FrozenSet[Fact] = frozenset()
    occluded: FrozenSet[Fact] = frozenset()
    step_index: int = 0

    def __post_init__(self) -> None:
        for obj, vec in self.features.items():
            if len(vec) != len(obj.type.feature_schema):
                raise ValueError(
                    f"{obj} has {len(vec)} features, schema declares "
                    f"{len(obj.type.feature_schema)}")
        objs = set(self.features)
        for _, args in self.facts | self.occluded:
            for o in args:
                if o not in objs:
                    raise ValueError(f"scene fact references unknown {o}")

    @property
    def objects(self) -> Tuple[ObjectRef, ...]:
        return tuple(sorted(self.features))

    def get(self, obj: ObjectRef, feature: str) -> float:
        return self.features[obj][obj.type.feature_index(feature)]

    def get_objects(self, t: ObjectType) -> Tuple[ObjectRef, ...]:
        return tuple(o for o in self.objects if o.is_instance(t))

    def key(self) -> Tuple:
        """Hashable identity of the observable content (ignores step)."""
        return (tuple(sorted((o.id, v) for o, v in self.features.items())),
                tuple(sorted(_fact_key(f) for f in self.facts)),
                tuple(sorted(_fact_key(f) for f in self.occluded)))

    def copy_with(self, updates: Optional[Mapping[ObjectRef,
                                                  Mapping[str, float]]] = None,
                  facts: Optional[Iterable[Fact]] = None,
                  occluded: Optional[Iterable[Fact]] = None,
                  step_index: Optional[int] = None) -> "FeatureState":
        feats: Dict[ObjectRef, Tuple[float, ...]] = dict(self.features)
        for obj, changes in (updates or {}).items():
            vec = list(feats[obj])
            for name, value in changes.items():
                vec[obj.type.feature_index(name)] = float(value)
            feats[obj] = tuple(vec)
        return FeatureState(
            feats,
            self.facts if facts is None else frozenset(facts),
            self.occluded if occluded is None else frozenset(occluded),
            self.step_index if step_index is None else step_index)


def _fact_key(fact: Fact) -> Tuple[str, Tuple[int, ...]]:
    return fact[0], tuple(o.id for o in fact[1])


@dataclass(frozen=True, order=True)
class GroundAtom:
    """A predicate applied to concrete objects.  Sorts by (predicate, ids)."""
    predicate: str
    args: Tuple[ObjectRef, ...]

    def __str__(self) -> str:
        return f"{self.predicate}({', '.join(o.name for o in self.args)})"


@dataclass(frozen=True)
class SkillSpec:
    name: str
    param_types: Tuple[ObjectType, ...]

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class GroundSkill:
    spec: SkillSpec
    args: Tuple[ObjectRef, ...]

    @property
    def name(self) -> str:
        return self.spec.name

    def __str__(self) -> str:
        return f"{self.spec.name}({', '.join(o.name for o in self.args)})"


def ground_skill(spec: SkillSpec, args: Sequence[ObjectRef]) -> GroundSkill:
    """Bind a skill to objects, checking arity and argument types."""
    if len(args) != len(spec.param_types):
        raise ArityMismatch(spec.name, len(spec.param_types), len(args))
    for i, (obj, t) in enumerate(zip(args, spec.param_types)):
        if not obj.is_instance(t):
            raise TypeMismatch(spec.name, i, t.name, obj.type.name)
    return GroundSkill(spec, tuple(args))


@dataclass(frozen=True)
class Task:
    objects: Tuple[ObjectRef, ...]
    init: FeatureState
    goal: FrozenSet[GroundAtom]
    task_id: int = 0
    impossible: bool = False

    def __post_init__(self) -> None:
        objs = set(self.objects)
        for atom in self.goal:
            if not set(atom.args) <= objs:
                raise ValueError(f"goal atom {atom} uses non-task objects")


@dataclass(frozen=True)
class Success:
    next: FeatureState


@dataclass(frozen=True)
class Failure:
    pass


ExecutionResult = Success | Failure


class Environment(abc.ABC):
    """A deterministic simulator that executes skills on one task at a time.

    Subclasses implement :meth:`_step`, returning the next state or ``None``
    on skill failure.  Failed skills leave the state untouched.
    """

    def __init__(self, skills: Sequence[SkillSpec]) -> None:
        self.skills = {s.name: s for s in skills}
        self._task: Optional[Task] = None
        self._state: Optional[FeatureState] = None

    @property
    def task(self) -> Task:
        if self._task is None:
            raise NoActiveTask("no active task")
        return self._task

    @property
    def state(self) -> FeatureState:
        if self._state is None:
            raise NoActiveTask("no active task")
        return self._state

    def reset(self, task: Task) -> FeatureState:
        self._task = task
        self._state = task.init
        return task.init

    def execute(self, skill: GroundSkill) -> ExecutionResult:
        state = self.state
        try:
            ground_skill(skill.spec, skill.args)
        except SkillTypeError:
            return Failure()
        if skill.spec.name not in self.skills:
            return Failure()
        nxt = self._step(state, skill)
        if nxt is None:
            return Failure()
        nxt = nxt.copy_with(step_index=state.step_index + 1)
        assert set(nxt.features) == set(state.features)
        self._state = nxt
        return Success(nxt)

    def simulate(self, state: FeatureState,
                 skill: GroundSkill) -> ExecutionResult:
        """Stateless execution from an arbitrary state."""
        saved_task, saved_state = self._task, self._state
        try:
            self._state = state
            if self._task is None:
                self._task = Task(state.objects, state, frozenset())
            return self.execute(skill)
        finally:
            self._task, self._state = saved_task, saved_state

    @abc.abstractmethod
    def _step(self, state: FeatureState,
              skill: GroundSkill) -> Optional[FeatureState]:
        raise NotImplementedError
