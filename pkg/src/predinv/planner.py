"""Best-first search over abstract states that yields a stream of distinct
high-level plans, and hierarchical execution of those plans."""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import (FrozenSet, Iterable, Iterator, List, Optional, Sequence,
                    Tuple)

from predinv.abstraction import AbstractState, DerivedCloser, abstract
from predinv.core import Environment, Failure, FeatureState, GroundAtom, \
    PredinvError, Task
from predinv.data import Episode, Step, abstract_episode
from predinv.dsl import PredicateTable
from predinv.perceiver import PerceptionContext
from predinv.worldmodel import HLA, GroundHLA, apply, ground_all

DEFAULT_NODE_BUDGET = 100_000
MAX_IDLE = 2
MAX_DEPTH = 16


class NoPlanFound(PredinvError):
    """The search space under the model holds no plan to the goal."""


@dataclass(frozen=True)
class HighLevelPlan:
    steps: Tuple[GroundHLA, ...]
    trajectory: Tuple[FrozenSet[GroundAtom], ...]  # predicted, len + 1

    def __len__(self) -> int:
        return len(self.steps)

    def __str__(self) -> str:
        return "[" + ", ".join(str(s) for s in self.steps) + "]"

    def key(self) -> Tuple:
        return tuple(s.sort_key() for s in self.steps)


@dataclass
class SearchStats:
    expanded: int = 0
    generated: int = 0
    plans: int = 0
    budget_hit: bool = False


def goal_count_h(s: Iterable[GroundAtom] | AbstractState,
                 goal: Iterable[GroundAtom]) -> int:
    """Number of goal atoms not in ``s``."""
    atoms = s.atoms if isinstance(s, AbstractState) else s
    atoms = atoms if isinstance(atoms, (set, frozenset)) else set(atoms)
    return sum(1 for g in goal if g not in atoms)


@dataclass(order=True)
class _Node:
    f: int
    tie: int
    g: int = field(compare=False)
    state: FrozenSet[GroundAtom] = field(compare=False)
    parent: Optional["_Node"] = field(compare=False, default=None)
    op: Optional[GroundHLA] = field(compare=False, default=None)
    idle: int = field(compare=False, default=0)

    def unwind(self) -> Tuple[Tuple[GroundHLA, ...],
                              Tuple[FrozenSet[GroundAtom], ...]]:
        ops, states = [], []
        node: Optional[_Node] = self
        while node is not None:
            states.append(node.state)
            if node.op is not None:
                ops.append(node.op)
            node = node.parent
        return tuple(reversed(ops)), tuple(reversed(states))


def plan_stream(table: PredicateTable, hlas: Sequence[HLA], task: Task,
                s0: AbstractState | FrozenSet[GroundAtom],
                n_abstract: int = 8,
                node_budget: int = DEFAULT_NODE_BUDGET,
                stats: Optional[SearchStats] = None,
                max_idle: int = MAX_IDLE,
                max_depth: int = MAX_DEPTH) -> Iterator[HighLevelPlan]:
    """Yield up to ``n_abstract`` distinct plans in nondecreasing f order.

    Nodes are (state, plan prefix) pairs ordered by g + goal-count, first in
    first out among ties.  A successor is dropped when its state was already
    generated at the same depth, unless it satisfies the goal or came from an
    operator with no modeled effects: such operators are what exploration
    needs to try, and their successors cannot be told apart by state.
    Keying on depth lets a plan pass through a state twice, which matters
    while the model still conflates states the world tells apart.  Paths are
    at most ``max_depth`` long and take at most ``max_idle`` effect-free
    steps in a row, so the search is finite.  Goal nodes are emitted and not
    expanded.
    """
    stats = stats if stats is not None else SearchStats()
    goal = frozenset(task.goal)
    ops = ground_all(hlas, task.objects)
    closer = DerivedCloser(table, task.objects) if table.derived else None
    derived = frozenset(d.name for d in table.derived)
    prepared = []
    for op in ops:
        empty = not op.hla.add and not op.hla.delete
        prepared.append((op, op.pre, op.add, op.delete, empty))
    root_state = s0.atoms if isinstance(s0, AbstractState) else frozenset(s0)
    counter = itertools.count()
    root = _Node(goal_count_h(root_state, goal), next(counter), 0, root_state)
    frontier: List[_Node] = [root]
    seen = {(root_state, 0)}
    emitted = 0
    while frontier:
        node = heapq.heappop(frontier)
        if goal <= node.state:
            steps, traj = node.unwind()
            emitted += 1
            stats.plans += 1
            yield HighLevelPlan(steps, traj)
            if emitted >= n_abstract:
                return
            continue
        if stats.expanded >= node_budget:
            stats.budget_hit = True
            return
        if node.g >= max_depth:
            continue
        stats.expanded += 1
        state = node.state
        g = node.g + 1
        prim = None
        for op, pre, add, delete, empty in prepared:
            if empty and node.idle >= max_idle:
                continue
            if not pre <= state:
                continue
            if empty:
                succ = state
            else:
                if prim is None:
                    prim = frozenset(a for a in state
                                     if a.predicate not in derived) \
                        if derived else state
                nxt = (prim - delete) | add
                succ = closer.close(nxt) if closer is not None \
                    else frozenset(nxt)
            is_goal = goal <= succ
            if (succ, g) in seen and not is_goal and not empty:
                continue
            seen.add((succ, g))
            stats.generated += 1
            heapq.heappush(frontier, _Node(g + goal_count_h(succ, goal),
                                           next(counter), g, succ, node, op,
                                           node.idle + 1 if empty else 0))


@dataclass(frozen=True)
class Satisficing:
    pass


@dataclass(frozen=True)
class Infeasible:
    step: int


@dataclass(frozen=True)
class NotSatisficing:
    pass


Outcome = Satisficing | Infeasible | NotSatisficing


@dataclass(frozen=True)
class ExecutionOutcome:
    outcome: Outcome
    episode: Episode
    final_atoms: Optional[FrozenSet[GroundAtom]] = None

    @property
    def satisficing(self) -> bool:
        return isinstance(self.outcome, Satisficing)

    @property
    def positives(self) -> int:
        return sum(1 for s in self.episode.steps if s.ok)

    @property
    def negatives(self) -> int:
        return sum(1 for s in self.episode.steps if not s.ok)


def goal_satisfied(x: FeatureState, task: Task, table: PredicateTable,
                   perceiver, ctx: Optional[PerceptionContext] = None
                   ) -> Tuple[bool, FrozenSet[GroundAtom]]:
    atoms = abstract(x, table, perceiver, ctx).atoms
    return frozenset(task.goal) <= atoms, atoms


def execute_hierarchically(plan: HighLevelPlan, env: Environment, task: Task,
                           table: PredicateTable,
                           perceiver) -> ExecutionOutcome:
    """Run each step's skill; stop at the first failure.

    The goal is checked by re-perceiving the final low-level state over
    ``table`` (which must contain the goal predicates).
    """
    env.reset(task)
    steps: List[Step] = []
    for i, op in enumerate(plan.steps):
        result = env.execute(op.skill)
        if isinstance(result, Failure):
            steps.append(Step(op.skill, None))
            return ExecutionOutcome(Infeasible(i),
                                    Episode(task.task_id, task.init,
                                            tuple(steps)))
        steps.append(Step(op.skill, result.next))
    ep = Episode(task.task_id, task.init, tuple(steps))
    atoms = abstract_episode(ep, table, perceiver)[-1]
    ok = frozenset(task.goal) <= atoms
    return ExecutionOutcome(Satisficing() if ok else NotSatisficing(), ep,
                            atoms)


def validate_plan(plan: HighLevelPlan, table: PredicateTable, task: Task,
                  s0: AbstractState | FrozenSet[GroundAtom]) -> bool:
    """Replay ``plan`` with :func:`apply` from ``s0``; True when every step
    is applicable, the predicted trajectory matches, and the goal holds."""
    s = s0 if isinstance(s0, AbstractState) else AbstractState(frozenset(s0))
    closer = DerivedCloser(table, task.objects) if table.derived else None
    if plan.trajectory and plan.trajectory[0] != s.atoms:
        return False
    for i, op in enumerate(plan.steps):
        nxt = apply(s, op, table, task.objects, closer)
        if nxt is None:
            return False
        if i + 1 < len(plan.trajectory) and \
                plan.trajectory[i + 1] != nxt.atoms:
            return False
        s = nxt
    return frozenset(task.goal) <= s.atoms
