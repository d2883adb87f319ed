"""Abstract states: evaluating predicates on low-level states and closing
atom sets under derived predicates."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import (Callable, Dict, FrozenSet, Iterable, List, Mapping,
                    Optional, Set, Tuple)

from predinv.core import FeatureState, GroundAtom, ObjectRef
from predinv.dsl import (EQ_EPSILON, PredicateDecl, PredicateTable,
                         PrimitiveEvaluator, compile_derived, references)
from predinv.perceiver import PerceptionContext

__all__ = ["GroundAtom", "AbstractState", "abstract", "close_derived",
           "close_derived_naive", "DerivedCloser", "typed_tuples"]


@dataclass(frozen=True)
class AbstractState:
    atoms: FrozenSet[GroundAtom]
    closed: bool = True

    def __contains__(self, atom: object) -> bool:
        return atom in self.atoms

    def __iter__(self):
        return iter(sorted(self.atoms))

    def __len__(self) -> int:
        return len(self.atoms)


def _by_type(objects: Iterable[ObjectRef]) -> Dict[str, Tuple[ObjectRef,
                                                              ...]]:
    dom: Dict[str, Tuple[ObjectRef, ...]] = {}
    for o in sorted(objects):
        dom[o.type.name] = dom.get(o.type.name, ()) + (o,)
    return dom


def typed_tuples(decl: PredicateDecl,
                 dom: Mapping[str, Tuple[ObjectRef, ...]]
                 ) -> Iterable[Tuple[ObjectRef, ...]]:
    return itertools.product(*(dom.get(t, ()) for t in decl.type_names))


def abstract(x: FeatureState, table: PredicateTable, perceiver,
             ctx: Optional[PerceptionContext] = None,
             eps: float = EQ_EPSILON) -> AbstractState:
    """All atoms over ``table`` that hold in ``x``, closed under derived
    predicates."""
    ev = PrimitiveEvaluator(x, perceiver, ctx, eps)
    dom = _by_type(x.objects)
    atoms: Set[GroundAtom] = set()
    for decl in table.primitives:
        for args in typed_tuples(decl, dom):
            if ev.holds(decl, args):
                atoms.add(GroundAtom(decl.name, args))
    return AbstractState(frozenset(close_derived(atoms, table, x.objects)),
                         True)


Index = Dict[str, Set[Tuple[ObjectRef, ...]]]


def _index(atoms: Iterable[GroundAtom]) -> Index:
    idx: Dict[str, Set[Tuple[ObjectRef, ...]]] = {}
    for a in atoms:
        idx.setdefault(a.predicate, set()).add(a.args)
    return idx


class DerivedCloser:
    """Compiled derived-predicate closure for a fixed object set.

    Evaluation runs stratum by stratum; within a stratum only predicates
    whose in-stratum dependencies gained atoms in the previous round are
    revisited, and only on tuples not yet known to hold.
    """

    def __init__(self, table: PredicateTable,
                 objects: Iterable[ObjectRef]) -> None:
        self.table = table
        self.dom = _by_type(objects)
        self.derived_names = frozenset(d.name for d in table.derived)
        self._fns: Dict[str, Callable] = {}
        self._tuples: Dict[str, List[Tuple[ObjectRef, ...]]] = {}
        self._params: Dict[str, Tuple[str, ...]] = {}
        self._deps: Dict[str, FrozenSet[str]] = {}
        for d in table.derived:
            self._fns[d.name] = compile_derived(d)
            self._tuples[d.name] = list(typed_tuples(d, self.dom))
            self._params[d.name] = tuple(v for v, _ in d.params)
            self._deps[d.name] = frozenset(references(d))

    def _eval(self, name: str, args: Tuple[ObjectRef, ...], idx) -> bool:
        env = dict(zip(self._params[name], args))
        return self._fns[name](env, idx, self.dom)

    def close_index(self, idx: Dict[str, Set[Tuple[ObjectRef, ...]]]
                    ) -> Dict[str, Set[Tuple[ObjectRef, ...]]]:
        for n in self.derived_names:
            idx.pop(n, None)
        for comp in self.table.strata:
            members = set(comp)
            for n in comp:
                idx[n] = set()
            todo = list(comp)
            while todo:
                changed: Set[str] = set()
                for n in todo:
                    true = idx[n]
                    for args in self._tuples[n]:
                        if args not in true and self._eval(n, args, idx):
                            true.add(args)
                            changed.add(n)
                todo = [n for n in comp
                        if self._deps[n] & changed & members]
        return idx

    def close(self, atoms: Iterable[GroundAtom]) -> FrozenSet[GroundAtom]:
        idx = self.close_index(_index(atoms))
        return frozenset(GroundAtom(p, args) for p, tups in idx.items()
                         for args in tups)


def close_derived(atoms: Iterable[GroundAtom], table: PredicateTable,
                  objects: Iterable[ObjectRef]) -> FrozenSet[GroundAtom]:
    """Primitive atoms of ``atoms`` plus every derived atom they entail.

    Derived atoms already present in the input are discarded and recomputed.
    """
    return DerivedCloser(table, objects).close(atoms)


def close_derived_naive(atoms: Iterable[GroundAtom], table: PredicateTable,
                        objects: Iterable[ObjectRef]
                        ) -> FrozenSet[GroundAtom]:
    """Reference fixpoint: each round re-derives every stratum atom from the
    previous round's set until nothing changes."""
    dom = _by_type(objects)
    derived = {d.name for d in table.derived}
    current = {a for a in atoms if a.predicate not in derived}
    for comp in table.strata:
        fns = {n: compile_derived(table[n]) for n in comp}
        layer: Set[GroundAtom] = set()
        while True:
            idx = _index(current | layer)
            nxt = set()
            for n in comp:
                params = [v for v, _ in table[n].params]
                for args in typed_tuples(table[n], dom):
                    if fns[n](dict(zip(params, args)), idx, dom):
                        nxt.add(GroundAtom(n, args))
            if nxt == layer:
                break
            layer = nxt
        current |= layer
    return frozenset(current)
