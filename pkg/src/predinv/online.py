"""The online learning loop: explore with the current model, invent
predicates when progress stalls, select a predicate set and relearn
operators.  Also the frozen-model evaluation protocol."""

from __future__ import annotations

import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from predinv.abstraction import abstract
from predinv.core import Environment, GroundSkill, Task
from predinv.data import (Episode, TransitionDataset,
                          abstract_dataset, restrict_dataset)
from predinv.dsl import PredicateTable
from predinv.learner import (ALPHA, ALPHA_SEL, RecordedPlan, assemble_model,
                             learn_hlas, select_predicates)
from predinv.perceiver import Perceiver
from predinv.planner import (DEFAULT_NODE_BUDGET, SearchStats,
                             execute_hierarchically, plan_stream,
                             validate_plan)
from predinv.proposer import propose_round
from predinv.worldmodel import HLA

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OnlineConfig:
    n_max_ite: int = 10
    n_abstract: int = 8
    node_budget: int = DEFAULT_NODE_BUDGET
    alpha: Fraction = ALPHA
    alpha_sel: Fraction = ALPHA_SEL
    k_switch: int = 1


@dataclass
class TaskOutcome:
    task_id: int
    solved: bool
    plans_executed: int
    no_plan: bool
    nodes: int
    skills: Tuple[GroundSkill, ...] = ()


@dataclass
class ExploreResult:
    episodes: List[Episode]
    rho: float
    nu: int
    outcomes: List[TaskOutcome]
    invalid_plans: int = 0

    @property
    def solved(self) -> List[TaskOutcome]:
        return [o for o in self.outcomes if o.solved]


def _attempt(table: PredicateTable, hlas: Sequence[HLA], env: Environment,
             task: Task, n_abstract: int, perceiver, node_budget: int,
             episodes: List[Episode]) -> Tuple[TaskOutcome, int, int]:
    """Plan and execute on one task.  Returns the outcome, the number of
    executed non-satisficing plans and of plans failing validation."""
    s0 = abstract(task.init, table, perceiver)
    stats = SearchStats()
    executed = failed = invalid = 0
    for plan in plan_stream(table, hlas, task, s0, n_abstract, node_budget,
                            stats):
        if not validate_plan(plan, table, task, s0):
            invalid += 1
        executed += 1
        out = execute_hierarchically(plan, env, task, table, perceiver)
        episodes.append(out.episode)
        if out.satisficing:
            skills = tuple(s.skill for s in out.episode.steps)
            return (TaskOutcome(task.task_id, True, executed, False,
                                stats.expanded, skills), failed, invalid)
        failed += 1
    no_plan = executed == 0 and not stats.budget_hit
    solved = no_plan and task.impossible
    return (TaskOutcome(task.task_id, solved, executed, no_plan,
                        stats.expanded), failed, invalid)


def explore(table: PredicateTable, hlas: Sequence[HLA], env: Environment,
            tasks: Sequence[Task], n_abstract: int, perceiver,
            node_budget: int = DEFAULT_NODE_BUDGET, workers: int = 1,
            env_factory: Optional[Callable[[], Environment]] = None
            ) -> ExploreResult:
    """Try every task with up to ``n_abstract`` plans each.

    An impossible task counts as solved when the model proves it has no
    plan; tasks without plans contribute nothing to the failed-plan count.
    With ``workers`` > 1 tasks run on separate environments made by
    ``env_factory``; results are merged in task order.
    """
    def one(task: Task, e: Environment):
        eps: List[Episode] = []
        o, failed, bad = _attempt(table, hlas, e, task, n_abstract,
                                  perceiver, node_budget, eps)
        return o, failed, bad, eps

    if workers > 1 and env_factory is not None and len(tasks) > 1:
        local = threading.local()

        def run(task: Task):
            if not hasattr(local, "env"):
                local.env = env_factory()
            return one(task, local.env)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [one(t, env) for t in tasks]
    episodes: List[Episode] = []
    outcomes = []
    nu = invalid = 0
    for o, failed, bad, eps in results:
        outcomes.append(o)
        episodes.extend(eps)
        nu += failed
        invalid += bad
    rho = sum(o.solved for o in outcomes) / len(tasks) if tasks else 0.0
    return ExploreResult(episodes, rho, nu, outcomes, invalid)


@dataclass
class IterationRecord:
    i: int
    rho: float
    nu: int
    n_psi: int
    n_candidates: int
    propose_condition: bool
    proposed: bool
    strategies: Tuple[str, ...]
    psi: Tuple[str, ...]
    n_operators: int
    n_transitions: int
    wall_time: float
    omega: Tuple[str, ...] = ()

    def as_dict(self) -> Dict:
        return {
            "i": self.i, "rho": self.rho, "nu": self.nu,
            "n_psi": self.n_psi, "n_candidates": self.n_candidates,
            "propose_condition": self.propose_condition,
            "proposed": self.proposed, "strategies": list(self.strategies),
            "psi": list(self.psi), "n_operators": self.n_operators,
            "n_transitions": self.n_transitions,
            "omega": list(self.omega),
        }


@dataclass
class LearnerState:
    psi: PredicateTable
    omega: List[HLA]
    psi_best: PredicateTable
    omega_best: List[HLA]
    rho_best: float = -math.inf
    nu_best: float = math.inf
    data: TransitionDataset = field(default_factory=TransitionDataset)
    candidates: Tuple[str, ...] = ()
    plans: Dict[int, List[Tuple[GroundSkill, ...]]] = field(
        default_factory=dict)
    best_history: List[Tuple[float, float]] = field(default_factory=list)

    def record_plan(self, task_id: int,
                    skills: Tuple[GroundSkill, ...]) -> None:
        known = self.plans.setdefault(task_id, [])
        if skills not in known:
            known.append(skills)


@dataclass
class OnlineResult:
    psi_best: PredicateTable
    omega_best: List[HLA]
    trace: List[IterationRecord]
    state: LearnerState
    budget_exhausted: bool
    invalid_plans: int = 0


def omega_summary(hlas: Sequence[HLA]) -> Tuple[str, ...]:
    """One "name:skill" entry per operator, sorted."""
    return tuple(sorted(f"{h.name}:{h.skill.name}" for h in hlas))


def _recorded_plans(state: LearnerState, tasks: Sequence[Task],
                    table: PredicateTable, perceiver) -> List[RecordedPlan]:
    by_id = {t.task_id: t for t in tasks}
    out = []
    for tid in sorted(state.plans):
        task = by_id.get(tid)
        if task is None:
            continue
        init = abstract(task.init, table, perceiver).atoms
        for skills in state.plans[tid]:
            out.append(RecordedPlan(tid, skills, init, frozenset(task.goal),
                                    task.objects))
    return out


def run_online(env: Environment, tasks: Sequence[Task],
               psi0: PredicateTable, omega0: Sequence[HLA],
               proposer, cfg: OnlineConfig = OnlineConfig(),
               perceiver: Optional[Perceiver] = None,
               data0: Optional[TransitionDataset] = None,
               initial_hlas: Optional[Sequence[HLA]] = None) -> OnlineResult:
    """Alternate exploration, invention, selection and operator learning.

    Bests are the model that earned the score: the (Ψ, Ω) used during the
    exploration that produced (ρ, ν).  Proposals are requested only when the
    solve rate did not strictly improve over the previous iteration.
    """
    if perceiver is None:
        raise ValueError("a perceiver is required")
    initial = list(omega0 if initial_hlas is None else initial_hlas)
    state = LearnerState(psi0, list(omega0), psi0, list(omega0))
    if data0 is not None:
        state.data.extend(data0.episodes)
    base = tuple(psi0.names)
    prev_rho, prev_nu = -math.inf, math.inf
    trace: List[IterationRecord] = []
    rounds = 0
    invalid = 0
    exhausted = True
    for i in range(1, cfg.n_max_ite + 1):
        t0 = time.perf_counter()
        res = explore(state.psi, state.omega, env, tasks, cfg.n_abstract,
                      perceiver, cfg.node_budget)
        invalid += res.invalid_plans
        if res.rho > state.rho_best or (res.rho == state.rho_best
                                        and res.nu < state.nu_best):
            state.rho_best, state.nu_best = res.rho, res.nu
            state.psi_best, state.omega_best = state.psi, list(state.omega)
        state.best_history.append((state.rho_best, state.nu_best))
        for o in res.solved:
            if o.skills:
                state.record_plan(o.task_id, o.skills)
        logger.info("iteration %d: rho=%.3f nu=%d |psi|=%d", i, res.rho,
                    res.nu, len(state.psi))
        if res.nu == 0:
            trace.append(IterationRecord(
                i, res.rho, res.nu, len(state.psi), len(state.psi), False,
                False, (), tuple(sorted(state.psi.names)), len(state.omega),
                len(state.data), time.perf_counter() - t0,
                omega_summary(state.omega)))
            exhausted = False
            break
        state.data.extend(res.episodes)
        cond = res.rho <= prev_rho or (res.rho == prev_rho
                                       and res.nu > prev_nu)
        proposals, strategies = [], ()
        proposed = False
        if cond:
            proposed = True
            view = abstract_dataset(state.data, state.psi, perceiver)
            proposals, strategies = propose_round(proposer, rounds, state.psi,
                                                  state.data, view)
            rounds += 1
        candidates = state.psi.union(proposals)
        state.candidates = tuple(sorted(candidates.names))
        data_abs = abstract_dataset(state.data, candidates, perceiver)
        plans = _recorded_plans(state, tasks, candidates, perceiver)
        psi = select_predicates(candidates, data_abs, base, cfg.alpha,
                                cfg.alpha_sel, plans, cfg.k_switch,
                                priors=initial)
        learned = learn_hlas(restrict_dataset(data_abs, psi.names), psi,
                             cfg.alpha, priors=initial)
        omega = assemble_model(learned, initial, psi)
        trace.append(IterationRecord(
            i, res.rho, res.nu, len(psi), len(candidates), cond, proposed,
            strategies, tuple(sorted(psi.names)), len(omega),
            len(state.data), time.perf_counter() - t0,
            omega_summary(omega)))
        assert proposed == cond, "proposal gating diverged from its condition"
        prev_rho, prev_nu = res.rho, res.nu
        state.psi, state.omega = psi, omega
    return OnlineResult(state.psi_best, state.omega_best, trace, state,
                        exhausted, invalid)


# ------------------------------------------------------------ evaluation

@dataclass
class EvalResult:
    outcomes: List[TaskOutcome]
    n_abstract: int
    wall_time: float
    invalid_plans: int = 0

    @property
    def solve_rate(self) -> float:
        return sum(o.solved for o in self.outcomes) / len(self.outcomes) \
            if self.outcomes else 0.0

    @property
    def plans_used(self) -> float:
        """Mean fraction of the plan budget executed per task."""
        if not self.outcomes:
            return 0.0
        return sum(o.plans_executed for o in self.outcomes) / (
            len(self.outcomes) * self.n_abstract)

    @property
    def plans_per_solved(self) -> float:
        """Mean plans executed per task solved by execution."""
        solved = [o for o in self.outcomes if o.solved and not o.no_plan]
        if not solved:
            return 0.0
        return sum(o.plans_executed for o in solved) / len(solved)

    def as_dict(self) -> Dict:
        return {"solve_rate": self.solve_rate,
                "plans_used": self.plans_used,
                "plans_per_solved": self.plans_per_solved,
                "nodes": self.nodes,
                "n_tasks": len(self.outcomes),
                "invalid_plans": self.invalid_plans,
                "no_plan": sum(o.no_plan for o in self.outcomes)}

    @property
    def nodes(self) -> float:
        return sum(o.nodes for o in self.outcomes) / len(self.outcomes) \
            if self.outcomes else 0.0


def evaluate(table: PredicateTable, hlas: Sequence[HLA], env: Environment,
             tasks: Sequence[Task], n_abstract: int, perceiver,
             node_budget: int = DEFAULT_NODE_BUDGET, workers: int = 1,
             env_factory: Optional[Callable[[], Environment]] = None
             ) -> EvalResult:
    """Frozen-model test protocol: plan and execute on each task."""
    t0 = time.perf_counter()
    res = explore(table, hlas, env, tasks, n_abstract, perceiver,
                  node_budget, workers, env_factory)
    return EvalResult(res.outcomes, n_abstract, time.perf_counter() - t0,
                      res.invalid_plans)
