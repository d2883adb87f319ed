"""Operator learning from abstract transitions, and scoring / greedy
selection of predicate sets."""

from __future__ import annotations

import dataclasses
import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import (Dict, FrozenSet, Iterable, List, Mapping, Optional,
                    Sequence, Set, Tuple)

import numpy as np

from predinv.abstraction import DerivedCloser
from predinv.core import GroundAtom, GroundSkill, ObjectRef, PredinvError, \
    SkillSpec
from predinv.data import AbstractDataset, AbstractTransition, restrict_dataset
from predinv.dsl import PredicateTable, dependency_closure
from predinv.worldmodel import HLA, LiftedAtom, bindings

logger = logging.getLogger(__name__)

ALPHA = Fraction(-1, 100)
ALPHA_SEL = Fraction(-1, 100)
EXHAUSTIVE_LIMIT = 12


class EmptyPartition(PredinvError):
    pass


@dataclass
class EffectPartition:
    """Transitions of one skill whose effects lift to the same atoms.

    ``members`` holds (dataset index, binding) pairs; bindings align with
    ``params``.
    """
    skill: SkillSpec
    params: Tuple[Tuple[str, str], ...]
    skill_args: Tuple[str, ...]
    add: FrozenSet[LiftedAtom]
    delete: FrozenSet[LiftedAtom]
    members: List[Tuple[int, Tuple[ObjectRef, ...]]] = field(
        default_factory=list)


def _effects(d: AbstractTransition, derived: FrozenSet[str]
             ) -> Tuple[List[GroundAtom], List[GroundAtom]]:
    add = sorted(a for a in d.add if a.predicate not in derived)
    dele = sorted(a for a in d.delete if a.predicate not in derived)
    return add, dele


def _lift(atoms: Iterable[GroundAtom],
          names: Mapping[ObjectRef, str]) -> FrozenSet[LiftedAtom]:
    return frozenset(LiftedAtom(a.predicate, tuple(names[o] for o in a.args))
                     for a in atoms)


def _new_partition(d: AbstractTransition, index: int,
                   derived: FrozenSet[str]) -> EffectPartition:
    add, dele = _effects(d, derived)
    order: List[ObjectRef] = list(dict.fromkeys(d.skill.args))
    for a in add + dele:
        for o in a.args:
            if o not in order:
                order.append(o)
    names = {o: f"?x{i}" for i, o in enumerate(order)}
    params = tuple((names[o], o.type.name) for o in order)
    return EffectPartition(d.skill.spec, params,
                           tuple(names[o] for o in d.skill.args),
                           _lift(add, names), _lift(dele, names),
                           [(index, tuple(order))])


def _unify(p: EffectPartition, d: AbstractTransition,
           derived: FrozenSet[str]) -> Optional[Tuple[ObjectRef, ...]]:
    """Binding of ``p.params`` under which ``d``'s effects equal ``p``'s."""
    if d.skill.spec != p.skill:
        return None
    add, dele = _effects(d, derived)
    if len(add) != len(p.add) or len(dele) != len(p.delete):
        return None
    objs = set(d.skill.args)
    for a in add + dele:
        objs.update(a.args)
    if len(objs) != len(p.params):
        return None
    fixed: Dict[str, ObjectRef] = {}
    for v, o in zip(p.skill_args, d.skill.args):
        if fixed.setdefault(v, o) != o:
            return None
    rest = sorted(objs - set(fixed.values()))
    free = [(v, t) for v, t in p.params if v not in fixed]
    if len(rest) != len(free):
        return None
    for perm in itertools.permutations(rest):
        if any(o.type.name != t for o, (_, t) in zip(perm, free)):
            continue
        sub = dict(fixed)
        sub.update({v: o for (v, _), o in zip(free, perm)})
        names = {o: v for v, o in sub.items()}
        if _lift(add, names) == p.add and _lift(dele, names) == p.delete:
            return tuple(sub[v] for v, _ in p.params)
    return None


def cluster_effects(data: AbstractDataset,
                    derived: Iterable[str] = ()) -> List[EffectPartition]:
    """Group successful transitions by skill and unifiable lifted effects.

    Transitions are merged greedily in dataset order.  Derived predicates
    never appear in effects.
    """
    derived = frozenset(derived)
    parts: List[EffectPartition] = []
    for i, d in enumerate(data):
        if not d.ok:
            continue
        for p in parts:
            b = _unify(p, d, derived)
            if b is not None:
                p.members.append((i, b))
                break
        else:
            parts.append(_new_partition(d, i, derived))
    return parts


# ------------------------------------------------------------ preconditions

def _lift_pre(d: AbstractTransition, params: Sequence[Tuple[str, str]],
              binding: Sequence[ObjectRef]) -> Set[LiftedAtom]:
    inv: Dict[ObjectRef, str] = {}
    for (v, _), o in zip(params, binding):
        inv.setdefault(o, v)
    return {LiftedAtom(a.predicate, tuple(inv[o] for o in a.args))
            for a in d.pre if all(o in inv for o in a.args)}


def intersection_atoms(p: EffectPartition,
                       data: AbstractDataset) -> List[LiftedAtom]:
    """Lifted atoms over the parameters true in every member pre-state."""
    if not p.members:
        raise EmptyPartition(f"partition of {p.skill.name} has no members")
    common: Optional[Set[LiftedAtom]] = None
    for i, b in p.members:
        lifted = _lift_pre(data[i], p.params, b)
        common = lifted if common is None else common & lifted
    return sorted(common or ())


def _nonmember_masks(p: EffectPartition, data: AbstractDataset,
                     cands: Sequence[LiftedAtom]) -> List[List[int]]:
    """Per non-member transition of the skill, the maximal bitmasks of
    candidate atoms true under some binding extending the skill binding."""
    members = {i for i, _ in p.members}
    out = []
    for i, d in enumerate(data):
        if i in members or d.skill.spec != p.skill:
            continue
        fixed = {}
        clash = False
        for v, o in zip(p.skill_args, d.skill.args):
            if fixed.setdefault(v, o) != o:
                clash = True
        masks: Set[int] = set()
        if not clash:
            for b in bindings(p.params, d.objects, True, fixed):
                sub = {v: o for (v, _), o in zip(p.params, b)}
                m = 0
                for k, a in enumerate(cands):
                    if a.ground(sub) in d.pre:
                        m |= 1 << k
                masks.add(m)
        out.append(_maximal(masks))
    return out


def _maximal(masks: Set[int]) -> List[int]:
    ms = sorted(masks, key=lambda m: -bin(m).count("1"))
    keep: List[int] = []
    for m in ms:
        if not any(m & k == m for k in keep):
            keep.append(m)
    return keep


@dataclass(frozen=True)
class PreconditionResult:
    pre: FrozenSet[LiftedAtom]
    objective: Fraction
    candidates: Tuple[LiftedAtom, ...]
    exhaustive: bool


def _objective(correct: int, n: int, size: int, alpha: Fraction) -> Fraction:
    return Fraction(correct, n) + alpha * size


def learn_preconditions(p: EffectPartition, data: AbstractDataset,
                        alpha: Fraction = ALPHA) -> PreconditionResult:
    """Precondition maximizing classification of the skill's data minus a
    size penalty, searched over subsets of the intersection atoms.

    Members count as correct when Pre holds under their binding; every other
    transition of the skill (failures and other partitions' members) counts
    as correct when no binding extending its skill arguments satisfies Pre.
    Ties go to the smaller set, then the lexicographically first one.
    """
    alpha = Fraction(alpha)
    cands = intersection_atoms(p, data)
    k = len(cands)
    non = _nonmember_masks(p, data, cands)
    n_mem = len(p.members)
    n = n_mem + len(non)
    if k <= EXHAUSTIVE_LIMIT:
        subsets = np.arange(1 << k, dtype=np.int64)
        covered = np.zeros(1 << k, dtype=np.int64)
        for masks in non:
            hit = np.zeros(1 << k, dtype=bool)
            for m in masks:
                hit |= (subsets & ~np.int64(m)) == 0
            covered += hit
        sizes = np.array([bin(s).count("1") for s in range(1 << k)],
                         dtype=np.int64)
        # J * n * den as an integer: exact comparison without Fractions.
        num, den = alpha.numerator, alpha.denominator
        score = den * (n - covered) + num * n * sizes
        best = score.max()
        tied = np.nonzero(score == best)[0]
        choice = min(tied.tolist(),
                     key=lambda s: (bin(s).count("1"), _bits(s)))
        chosen = [cands[i] for i in _bits(choice)]
        obj = _objective(int(n - covered[choice]), n, len(chosen), alpha)
        return PreconditionResult(frozenset(chosen), obj, tuple(cands), True)
    return _greedy_backward(cands, non, n, alpha)


def _bits(s: int) -> Tuple[int, ...]:
    return tuple(i for i in range(s.bit_length()) if s >> i & 1)


def _score_mask(s: int, non: List[List[int]], n: int,
                alpha: Fraction) -> Fraction:
    covered = sum(1 for masks in non if any(s & m == s for m in masks))
    return _objective(n - covered, n, bin(s).count("1"), alpha)


def _greedy_backward(cands: List[LiftedAtom], non: List[List[int]], n: int,
                     alpha: Fraction) -> PreconditionResult:
    """Approximate search for large candidate sets: drop atoms one at a
    time while the objective strictly improves."""
    cur = (1 << len(cands)) - 1
    cur_j = _score_mask(cur, non, n, alpha)
    while cur:
        best = None
        for i in _bits(cur):
            nxt = cur & ~(1 << i)
            j = _score_mask(nxt, non, n, alpha)
            if best is None or j > best[0]:
                best = (j, nxt)
        if best is None or best[0] <= cur_j:
            break
        cur_j, cur = best
    chosen = frozenset(cands[i] for i in _bits(cur))
    return PreconditionResult(chosen, cur_j, tuple(cands), False)


def intersection_preconditions(p: EffectPartition,
                               data: AbstractDataset) -> PreconditionResult:
    """The conservative baseline: every atom shared by all members."""
    cands = intersection_atoms(p, data)
    return PreconditionResult(frozenset(cands), Fraction(0), tuple(cands),
                              True)


# ------------------------------------------------------------ operators

def _prior_renaming(p: EffectPartition, h: HLA) -> Optional[Dict[str, str]]:
    """Variable map from ``h`` onto ``p`` under which their skill arguments
    and effects coincide."""
    if h.skill != p.skill or len(h.add) != len(p.add) \
            or len(h.delete) != len(p.delete):
        return None
    fixed: Dict[str, str] = {}
    for hv, pv in zip(h.skill_args, p.skill_args):
        if fixed.setdefault(hv, pv) != pv:
            return None
    in_eff = {v for a in h.add | h.delete for v in a.vars}
    free_h = sorted(in_eff - set(fixed))
    free_p = [v for v, _ in p.params if v not in fixed.values()]
    htypes = dict(h.params)
    ptypes = dict(p.params)
    for perm in itertools.permutations(free_p, len(free_h)):
        sub = dict(fixed)
        sub.update(zip(free_h, perm))
        if any(htypes[v] != ptypes[sub[v]] for v in sub):
            continue

        def ren(atoms):
            return frozenset(LiftedAtom(a.predicate,
                                        tuple(sub[v] for v in a.vars))
                             for a in atoms)
        if ren(h.add) == p.add and ren(h.delete) == p.delete:
            return sub
    return None


def prior_preconditions(p: EffectPartition, data: AbstractDataset,
                        priors: Sequence[HLA]) -> FrozenSet[LiftedAtom]:
    """Preconditions of given operators with the same effects as ``p``,
    restricted to atoms every member satisfies."""
    out: Set[LiftedAtom] = set()
    common = None
    for h in priors:
        sub = _prior_renaming(p, h)
        if sub is None:
            continue
        if common is None:
            common = set(intersection_atoms(p, data))
        for a in h.pre:
            if all(v in sub for v in a.vars):
                la = LiftedAtom(a.predicate, tuple(sub[v] for v in a.vars))
                if la in common:
                    out.add(la)
    return frozenset(out)


def with_context(p: EffectPartition,
                 data: AbstractDataset) -> EffectPartition:
    """Extend ``p`` with one parameter per context type: a type absent from
    the parameters that has exactly one object in every member."""
    present = {t for _, t in p.params}
    unique: Optional[Dict[str, ObjectRef]] = None
    per_member = []
    for i, _ in p.members:
        by_type: Dict[str, List[ObjectRef]] = {}
        for o in data[i].objects:
            by_type.setdefault(o.type.name, []).append(o)
        found = {t: os[0] for t, os in by_type.items()
                 if len(os) == 1 and t not in present}
        per_member.append(found)
        unique = set(found) if unique is None else unique & set(found)
    if not unique:
        return p
    types = sorted(unique)
    n = len(p.params)
    extra = tuple((f"?x{n + k}", t) for k, t in enumerate(types))
    members = [(i, b + tuple(found[t] for t in types))
               for (i, b), found in zip(p.members, per_member)]
    return dataclasses.replace(p, params=p.params + extra, members=members)


def _drop_unused(params: Tuple[Tuple[str, str], ...], keep: int,
                 pre: FrozenSet[LiftedAtom]) -> Tuple[Tuple[str, str], ...]:
    used = {v for a in pre for v in a.vars}
    return params[:keep] + tuple(pt for pt in params[keep:] if pt[0] in used)


def learn_hlas(data: AbstractDataset, table: PredicateTable,
               alpha: Fraction = ALPHA, method: str = "optimistic",
               priors: Sequence[HLA] = ()) -> List[HLA]:
    """Cluster successful transitions and learn one HLA per partition.

    Preconditions may also mention context objects (see
    :func:`with_context`); context parameters left unused are dropped.
    ``method`` is "optimistic" (the penalized objective) or "intersection".
    With ``priors``, a partition whose effects match a prior operator also
    keeps that operator's preconditions wherever the data agrees with them.
    """
    derived = frozenset(d.name for d in table.derived)
    parts = cluster_effects(data, derived)
    parts.sort(key=lambda p: p.skill.name)  # stable: keeps data order
    priors = [h for h in priors if h.pre and h.predicates() <= table.names]
    hlas = []
    for i, p in enumerate(parts):
        n_own = len(p.params)
        p = with_context(p, data)
        if method == "optimistic":
            res = learn_preconditions(p, data, alpha)
        elif method == "intersection":
            res = intersection_preconditions(p, data)
        else:
            raise ValueError(f"unknown precondition method {method!r}")
        pre = res.pre | prior_preconditions(p, data, priors) if priors \
            else res.pre
        hlas.append(HLA(f"Op{i}", _drop_unused(p.params, n_own, pre),
                        p.skill, p.skill_args, pre, p.add, p.delete))
    return hlas


def _covers(learned: Sequence[HLA], h: HLA) -> bool:
    """Some learned operator for h's skill shows all of h's effects."""
    def preds(atoms):
        return sorted(a.predicate for a in atoms)
    for g in learned:
        if g.skill != h.skill:
            continue
        ga, gd = preds(g.add), preds(g.delete)
        if all(ga.count(x) >= preds(h.add).count(x) for x in preds(h.add)) \
                and all(gd.count(x) >= preds(h.delete).count(x)
                        for x in preds(h.delete)):
            return True
    return False


def assemble_model(learned: Sequence[HLA], initial: Sequence[HLA],
                   table: PredicateTable) -> List[HLA]:
    """Learned operators plus every initial operator whose effects no
    learned operator of the same skill has exhibited yet."""
    out = list(learned)
    for h in initial:
        if not h.predicates() <= table.names:
            continue
        if not _covers(learned, h):
            out.append(h)
    return out


# ------------------------------------------------------------ scoring

def hla_matches(h: HLA, skill: GroundSkill, atoms: FrozenSet[GroundAtom],
                objects: Sequence[ObjectRef]) -> bool:
    """Some grounding of ``h`` calls ``skill`` and has its Pre in ``atoms``."""
    if h.skill != skill.spec:
        return False
    fixed: Dict[str, ObjectRef] = {}
    for v, o in zip(h.skill_args, skill.args):
        if fixed.setdefault(v, o) != o:
            return False
    pre = sorted(h.pre)
    for b in bindings(h.params, objects, h.distinct, fixed):
        sub = {v: o for (v, _), o in zip(h.params, b)}
        if all(a.ground(sub) in atoms for a in pre):
            return True
    return False


def classification_score(hlas: Sequence[HLA],
                         data: AbstractDataset) -> Fraction:
    """Fraction of transitions whose success or failure the model's
    preconditions predict."""
    if not data:
        return Fraction(1)
    correct = 0
    for d in data:
        hit = any(hla_matches(h, d.skill, d.pre, d.objects) for h in hlas)
        correct += hit == d.ok
    return Fraction(correct, len(data))


def score_predicate_set(names: Iterable[str], data: AbstractDataset,
                        table: PredicateTable, alpha: Fraction = ALPHA,
                        alpha_sel: Fraction = ALPHA_SEL) -> Fraction:
    """Classification accuracy of operators learned under ``names`` plus a
    per-predicate penalty.  ``data`` is abstracted under ``table``, which
    must contain ``names``."""
    sub = table.subset(names)
    view = restrict_dataset(data, sub.names)
    hlas = learn_hlas(view, sub, alpha)
    return classification_score(hlas, view) + Fraction(alpha_sel) * len(sub)


@dataclass(frozen=True)
class RecordedPlan:
    """A satisficing plan with its episode's abstract states."""
    task_id: int
    skills: Tuple[GroundSkill, ...]
    init: FrozenSet[GroundAtom]
    goal: FrozenSet[GroundAtom]
    objects: Tuple[ObjectRef, ...]


def plan_consistent(plan: RecordedPlan, hlas: Sequence[HLA],
                    table: PredicateTable) -> bool:
    """Each step is applicable under some operator and the goal is
    entailed at the end."""
    derived = frozenset(d.name for d in table.derived)
    closer = DerivedCloser(table, plan.objects) if derived else None
    s = frozenset(a for a in plan.init if a.predicate in table.names)
    if closer is not None:
        s = closer.close(s)
    for skill in plan.skills:
        nxt = None
        for h in hlas:
            if h.skill != skill.spec:
                continue
            fixed = dict(zip(h.skill_args, skill.args))
            for b in bindings(h.params, plan.objects, h.distinct, fixed):
                sub = {v: o for (v, _), o in zip(h.params, b)}
                if all(a.ground(sub) in s for a in h.pre):
                    prim = {a for a in s if a.predicate not in derived}
                    prim -= {a.ground(sub) for a in h.delete}
                    prim |= {a.ground(sub) for a in h.add}
                    nxt = closer.close(prim) if closer else frozenset(prim)
                    break
            if nxt is not None:
                break
        if nxt is None:
            return False
        s = nxt
    return plan.goal <= s


@dataclass
class SelectionStep:
    added: Tuple[str, ...]
    score: Fraction


def select_predicates(candidates: PredicateTable, data: AbstractDataset,
                      base: Iterable[str], alpha: Fraction = ALPHA,
                      alpha_sel: Fraction = ALPHA_SEL,
                      plans: Sequence[RecordedPlan] = (),
                      k_switch: int = 1,
                      trace: Optional[List[SelectionStep]] = None,
                      priors: Sequence[HLA] = ()) -> PredicateTable:
    """Greedy forward selection from ``base``.

    Each step adds the candidate (with its dependencies) that most improves
    the score; ties go to the alphabetically first name.  Once at least
    ``k_switch`` satisficing plans are recorded, the fraction of them that
    stay valid under the learned model is added to the score.
    """
    alpha, alpha_sel = Fraction(alpha), Fraction(alpha_sel)
    use_plans = len(plans) >= k_switch and len(plans) > 0
    cache: Dict[FrozenSet[str], Fraction] = {}

    def score(names: FrozenSet[str]) -> Fraction:
        if names not in cache:
            sub = candidates.subset(names)
            view = restrict_dataset(data, sub.names)
            hlas = learn_hlas(view, sub, alpha, priors=priors)
            j = classification_score(hlas, view) + alpha_sel * len(sub)
            if use_plans:
                ok = sum(plan_consistent(p, hlas, sub) for p in plans)
                j += Fraction(ok, len(plans))
            cache[names] = j
        return cache[names]

    current = frozenset(dependency_closure(candidates.decls, base))
    cur = score(current)
    if trace is not None:
        trace.append(SelectionStep(tuple(sorted(current)), cur))
    while True:
        best = None
        for name in sorted(candidates.names - current):
            nxt = frozenset(dependency_closure(candidates.decls,
                                               current | {name}))
            j = score(nxt)
            if best is None or j > best[0]:
                best = (j, nxt)
        if best is None or best[0] <= cur:
            break
        if trace is not None:
            trace.append(SelectionStep(tuple(sorted(best[1] - current)),
                                       best[0]))
        cur, current = best
    return candidates.subset(current)
