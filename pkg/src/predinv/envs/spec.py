"""Domain specifications loaded from the YAML and listing files shipped in
``envs/data``."""

from __future__ import annotations

import random
from dataclasses import dataclass
from importlib import resources
from typing import Any, Callable, List, Mapping, Optional, Tuple

import yaml

from predinv.core import (FeatureState, GroundAtom, ObjectRef, ObjectType,
                          PredinvError, SkillSpec, Task)
from predinv.dsl import PredicateTable, parse, typecheck
from predinv.perceiver import AssertionRegistry, NominalEffect
from predinv.worldmodel import HLA, parse_model


class UnknownDomain(PredinvError):
    pass


def data_text(name: str) -> str:
    return resources.files("predinv.envs").joinpath("data", name).read_text(
        encoding="utf-8")


@dataclass(frozen=True)
class DomainSpec:
    name: str
    types: Mapping[str, ObjectType]
    skills: Mapping[str, SkillSpec]
    predicates: PredicateTable  # goal, initial and oracle predicates
    goal_predicates: Tuple[str, ...]
    initial_predicates: Tuple[str, ...]
    oracle_predicates: Tuple[str, ...]
    initial_hlas: Tuple[HLA, ...]
    oracle_hlas: Tuple[HLA, ...]
    registry: AssertionRegistry
    n_abstract: int
    task_params: Mapping[str, Mapping[str, Any]]
    pool_file: str

    @property
    def initial_table(self) -> PredicateTable:
        return self.predicates.subset(self.initial_predicates)

    @property
    def oracle_table(self) -> PredicateTable:
        return self.predicates.subset(self.oracle_predicates)

    def objects(self, type_name: str, start: int, n: int) -> List[ObjectRef]:
        t = self.types[type_name]
        return [ObjectRef(i, f"{type_name}{i}", t)
                for i in range(start, start + n)]


def load_spec(name: str) -> DomainSpec:
    try:
        raw = yaml.safe_load(data_text(f"{name}.yaml"))
    except FileNotFoundError:
        raise UnknownDomain(f"unknown domain {name!r}") from None
    types = {t: ObjectType(t, tuple((f, tuple(r)) for f, r in
                                    (feats or {}).items()))
             for t, feats in raw["types"].items()}
    skills = {s: SkillSpec(s, tuple(types[t] for t in ts))
              for s, ts in raw["skills"].items()}
    table = typecheck(parse(data_text(raw["predicates"])), types)
    nominal = {
        skill: tuple(NominalEffect(e["relation"], tuple(e["args"]),
                                   bool(e["value"])) for e in effs)
        for skill, effs in (raw.get("nominal_effects") or {}).items()}
    registry = AssertionRegistry(dict(raw.get("assertions") or {}), nominal)
    initial = parse_model(data_text(raw["initial_model"]), skills, types)
    oracle = parse_model(data_text(raw["oracle_model"]), skills, types)
    spec = DomainSpec(
        name=raw["name"], types=types, skills=skills, predicates=table,
        goal_predicates=tuple(raw["goal_predicates"]),
        initial_predicates=tuple(raw["initial_predicates"]),
        oracle_predicates=tuple(raw["oracle_predicates"]),
        initial_hlas=tuple(initial), oracle_hlas=tuple(oracle),
        registry=registry, n_abstract=int(raw["n_abstract"]),
        task_params=raw["tasks"], pool_file=raw["pool"])
    for h in spec.initial_hlas:
        h.check_against(spec.initial_table)
    for h in spec.oracle_hlas:
        h.check_against(spec.oracle_table)
    return spec


Sampler = Callable[[DomainSpec, random.Random, Mapping[str, Any], int], Task]


@dataclass
class TaskGenerator:
    """Seeded task sampler; each split draws from its own random stream."""
    spec: DomainSpec
    sampler: Sampler
    seed: int = 0

    def generate(self, split: str, n: Optional[int] = None) -> List[Task]:
        params = self.spec.task_params[split]
        n = int(params["count"]) if n is None else n
        rng = random.Random(f"{self.spec.name}:{split}:{self.seed}")
        return [self.sampler(self.spec, rng, params, i) for i in range(n)]

    def train(self, n: Optional[int] = None) -> List[Task]:
        return self.generate("train", n)

    def test(self, n: Optional[int] = None) -> List[Task]:
        return self.generate("test", n)


def build_state(features: Mapping[ObjectRef, Mapping[str, float]],
                facts=(), occluded=()) -> FeatureState:
    vecs = {o: tuple(float(f[name]) for name in o.type.feature_names)
            for o, f in features.items()}
    return FeatureState(vecs, frozenset(facts), frozenset(occluded))


def atom(pred: str, *args: ObjectRef) -> GroundAtom:
    return GroundAtom(pred, tuple(args))
