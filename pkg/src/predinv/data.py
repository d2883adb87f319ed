"""Interaction data: executed skill sequences and their abstract views."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, Iterator, List, Optional, Tuple

from predinv.abstraction import abstract
from predinv.core import FeatureState, GroundAtom, GroundSkill, ObjectRef
from predinv.dsl import PredicateTable
from predinv.perceiver import PerceptionContext


@dataclass(frozen=True)
class Step:
    skill: GroundSkill
    next: Optional[FeatureState]  # None when the skill failed

    @property
    def ok(self) -> bool:
        return self.next is not None


@dataclass(frozen=True)
class Episode:
    """One executed plan: the start state and each attempted skill."""
    task_id: int
    init: FeatureState
    steps: Tuple[Step, ...] = ()

    @property
    def objects(self) -> Tuple[ObjectRef, ...]:
        return self.init.objects

    def states(self) -> Iterator[Tuple[FeatureState, Step]]:
        """(state before, step) pairs."""
        x = self.init
        for st in self.steps:
            yield x, st
            if st.next is not None:
                x = st.next


@dataclass
class TransitionDataset:
    """Append-only collection of episodes."""
    episodes: List[Episode] = field(default_factory=list)

    def extend(self, episodes: Iterable[Episode]) -> None:
        self.episodes.extend(episodes)

    def __len__(self) -> int:
        return sum(len(e.steps) for e in self.episodes)

    @property
    def positives(self) -> List[Tuple[FeatureState, GroundSkill,
                                      FeatureState]]:
        return [(x, st.skill, st.next) for e in self.episodes
                for x, st in e.states() if st.next is not None]

    @property
    def negatives(self) -> List[Tuple[FeatureState, GroundSkill]]:
        return [(x, st.skill) for e in self.episodes
                for x, st in e.states() if st.next is None]

    def summary(self) -> str:
        return (f"{len(self.positives)} positives, "
                f"{len(self.negatives)} negatives")


@dataclass(frozen=True)
class AbstractTransition:
    skill: GroundSkill
    pre: FrozenSet[GroundAtom]
    post: Optional[FrozenSet[GroundAtom]]  # None for failures
    objects: Tuple[ObjectRef, ...] = ()

    @property
    def ok(self) -> bool:
        return self.post is not None

    @property
    def add(self) -> FrozenSet[GroundAtom]:
        return self.post - self.pre if self.post is not None else frozenset()

    @property
    def delete(self) -> FrozenSet[GroundAtom]:
        return self.pre - self.post if self.post is not None else frozenset()

    def restrict(self, names: FrozenSet[str]) -> "AbstractTransition":
        pre = frozenset(a for a in self.pre if a.predicate in names)
        post = None if self.post is None else frozenset(
            a for a in self.post if a.predicate in names)
        return AbstractTransition(self.skill, pre, post, self.objects)


AbstractDataset = List[AbstractTransition]


def abstract_episode(ep: Episode, table: PredicateTable,
                     perceiver) -> List[FrozenSet[GroundAtom]]:
    """Abstract state before each step plus the final state.

    Each state is perceived with the previous successful skill, state and
    atoms as context; a failed skill leaves state and context unchanged.
    """
    ctx = PerceptionContext()
    x = ep.init
    s = abstract(x, table, perceiver, ctx).atoms
    out = [s]
    for st in ep.steps:
        if st.next is not None:
            ctx = PerceptionContext(st.skill, x, {a: True for a in s})
            x = st.next
            s = abstract(x, table, perceiver, ctx).atoms
        out.append(s)
    return out


def abstract_dataset(data: TransitionDataset, table: PredicateTable,
                     perceiver) -> AbstractDataset:
    """Positive and negative transitions over ``table``, in data order."""
    out: AbstractDataset = []
    for ep in data.episodes:
        states = abstract_episode(ep, table, perceiver)
        objs = ep.objects
        for t, st in enumerate(ep.steps):
            post = states[t + 1] if st.ok else None
            out.append(AbstractTransition(st.skill, states[t], post, objs))
    return out


def restrict_dataset(data: AbstractDataset,
                     names: Iterable[str]) -> AbstractDataset:
    names = frozenset(names)
    return [d.restrict(names) for d in data]
