"""Predicate proposal sources: a scripted per-domain pool and an adapter
for an external proposal service spoken to over HTTP."""

from __future__ import annotations

import dataclasses
import json
import logging
import socket
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, List, Mapping, Sequence, Tuple

import yaml

from predinv.core import PredinvError
from predinv.data import AbstractDataset, TransitionDataset
from predinv.dsl import (DSLError, PredicateDecl, PredicateTable,
                         canonical_body, parse, pretty)
from predinv.perceiver import label_objects

logger = logging.getLogger(__name__)

STRATEGIES = ("S1", "S2", "S3")
PROTOCOL = "predinv.propose/1"


class PoolExhausted(PredinvError):
    """Raised on request when a pool has nothing left to offer."""


@dataclass(frozen=True)
class ProposalRequest:
    strategy: str
    iteration: int
    psi: PredicateTable
    data: TransitionDataset = field(default_factory=TransitionDataset)
    abstract: AbstractDataset = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")

    def skills_with(self) -> Tuple[FrozenSet[str], FrozenSet[str]]:
        """Skill names with at least one success, and with a failure."""
        pos, neg = set(), set()
        for ep in self.data.episodes:
            for st in ep.steps:
                (pos if st.ok else neg).add(st.skill.name)
        return frozenset(pos), frozenset(neg)


# ------------------------------------------------------------ scripted pool

@dataclass(frozen=True)
class PoolEntry:
    decl: PredicateDecl
    strategies: FrozenSet[str]
    when: Mapping[str, Any] = field(default_factory=dict)

    def available(self, positives: FrozenSet[str], negatives: FrozenSet[str],
                  psi: FrozenSet[str]) -> bool:
        w = self.when
        if "positive" in w and w["positive"] not in positives:
            return False
        if "negative" in w and w["negative"] not in negatives:
            return False
        if "contrast" in w and not (w["contrast"] in positives
                                    and w["contrast"] in negatives):
            return False
        return set(w.get("psi", ())) <= psi


def load_pool(text: str) -> List[PoolEntry]:
    out = []
    for item in yaml.safe_load(text) or []:
        decls = parse(item["source"])
        tags = frozenset(item.get("strategies", ()))
        if not tags <= set(STRATEGIES):
            raise ValueError(f"bad strategy tags {sorted(tags)}")
        for d in decls:
            out.append(PoolEntry(d, tags, dict(item.get("when") or {})))
    return out


def _novel(decl: PredicateDecl, taken: Mapping[str, PredicateDecl]) -> bool:
    key = canonical_body(decl)
    return all(canonical_body(d) != key for d in taken.values())


def _accept(decls: Sequence[PredicateDecl], psi: PredicateTable,
            rename: bool) -> List[PredicateDecl]:
    """Keep well-typed declarations that are new up to alpha-equivalence.

    With ``rename`` a clashing name gets a numeric suffix; otherwise a
    clashing name is taken to be the same predicate and skipped.
    """
    taken: Dict[str, PredicateDecl] = dict(psi.decls)
    out: List[PredicateDecl] = []
    for d in decls:
        if d.name in taken:
            if not rename:
                continue
            k = 2
            while f"{d.name}{k}" in taken:
                k += 1
            logger.info("renaming proposed %s to %s%d", d.name, d.name, k)
            d = dataclasses.replace(d, name=f"{d.name}{k}")
        if not _novel(d, taken):
            logger.debug("dropping %s: equivalent to an existing predicate",
                         d.name)
            continue
        try:
            psi.union(out + [d])
        except DSLError as e:
            logger.info("dropping proposal %s: %s", d.name, e)
            continue
        taken[d.name] = d
        out.append(d)
    return out


class ScriptedProposer:
    """Deterministic stand-in for a proposal model: a fixed pool whose
    entries unlock as evidence accumulates.

    With ``strict`` set, a request that yields nothing raises
    :class:`PoolExhausted` instead of returning an empty list.
    """

    def __init__(self, pool: Sequence[PoolEntry],
                 strict: bool = False) -> None:
        self.pool = list(pool)
        self.strict = strict

    @classmethod
    def for_domain(cls, spec) -> "ScriptedProposer":
        from predinv.envs.spec import data_text
        return cls(load_pool(data_text(spec.pool_file)))

    def propose(self, req: ProposalRequest) -> List[PredicateDecl]:
        pos, neg = req.skills_with()
        names = req.psi.names
        picked = [e.decl for e in self.pool
                  if req.strategy in e.strategies
                  and e.available(pos, neg, names)]
        out = _accept(picked, req.psi, rename=False)
        if not out and self.strict:
            raise PoolExhausted(f"no {req.strategy} proposals left")
        return out

    def remaining(self, psi: PredicateTable) -> List[PredicateDecl]:
        return _accept([e.decl for e in self.pool], psi, rename=False)


# ------------------------------------------------------------ external

@dataclass(frozen=True)
class EndpointConfig:
    url: str
    timeout: float = 30.0
    max_proposals: int = 10
    max_exemplars: int = 20


def request_document(req: ProposalRequest,
                     max_proposals: int = 10,
                     max_exemplars: int = 20) -> Dict[str, Any]:
    """The JSON request body.  S1 carries labeled states per skill, S2
    before/after pairs of successful steps, S3 only the predicates."""
    labels: Dict = {}
    for d in req.abstract:
        labels.update(label_objects(d.objects))

    def atoms(s) -> List[str]:
        return [f"{a.predicate}(" + ", ".join(labels[o] for o in a.args)
                + ")" for a in sorted(s)]

    def skill(g) -> str:
        return f"{g.name}(" + ", ".join(labels[o] for o in g.args) + ")"

    exemplars: List[Dict[str, Any]] = []
    per_skill: Dict[Tuple[str, bool], int] = {}
    if req.strategy != "S3":
        for d in req.abstract:
            if req.strategy == "S2" and not d.ok:
                continue
            k = (d.skill.name, d.ok)
            if per_skill.get(k, 0) >= max_exemplars:
                continue
            per_skill[k] = per_skill.get(k, 0) + 1
            item: Dict[str, Any] = {"skill": skill(d.skill)}
            if req.strategy == "S1":
                item["outcome"] = "success" if d.ok else "failure"
                item["state"] = atoms(d.pre)
            else:
                item["before"] = atoms(d.pre)
                item["after"] = atoms(d.post)
            exemplars.append(item)
    types = {t.name: list(t.feature_names)
             for t in req.psi.types.values()}
    return {
        "protocol": PROTOCOL,
        "strategy": req.strategy,
        "iteration": req.iteration,
        "types": types,
        "objects": {labels[o]: o.type.name for o in sorted(labels)},
        "predicates": [pretty(req.psi[n]) for n in sorted(req.psi.names)],
        "exemplars": exemplars,
        "max_proposals": max_proposals,
    }


def parse_response(body: bytes | str, psi: PredicateTable,
                   limit: int = 10) -> List[PredicateDecl]:
    """Declarations from a response document; malformed entries are
    logged and dropped."""
    try:
        doc = json.loads(body)
    except (ValueError, TypeError) as e:
        logger.warning("proposal response is not JSON: %s", e)
        return []
    items = doc.get("proposals") if isinstance(doc, dict) else None
    if not isinstance(items, list):
        logger.warning("proposal response lacks a proposals list")
        return []
    decls: List[PredicateDecl] = []
    for src in items:
        if not isinstance(src, str):
            logger.info("dropping non-text proposal %r", src)
            continue
        try:
            decls.extend(parse(src))
        except DSLError as e:
            logger.info("dropping unparsable proposal: %s", e)
    return _accept(decls, psi, rename=True)[:limit]


class ExternalProposer:
    """Sends each request to a proposal service and reads back DSL text.

    Transport errors and timeouts yield no proposals.
    """

    def __init__(self, config: EndpointConfig) -> None:
        self.config = config

    def propose(self, req: ProposalRequest) -> List[PredicateDecl]:
        cfg = self.config
        body = json.dumps(request_document(req, cfg.max_proposals,
                                           cfg.max_exemplars),
                          sort_keys=True).encode()
        http = urllib.request.Request(
            cfg.url, data=body, method="POST",
            headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(http, timeout=cfg.timeout) as resp:
                raw = resp.read()
        except (socket.timeout, TimeoutError):
            logger.warning("proposal service timed out after %ss",
                           cfg.timeout)
            return []
        except (urllib.error.URLError, OSError) as e:
            logger.warning("proposal service unreachable: %s", e)
            return []
        return parse_response(raw, req.psi, cfg.max_proposals)


# ------------------------------------------------------------ schedule

def strategies_for(round_index: int) -> Tuple[str, str]:
    """S3 first, then S1 on even rounds and S2 on odd ones."""
    return ("S3", "S1" if round_index % 2 == 0 else "S2")


def propose_round(source, round_index: int, psi: PredicateTable,
                  data: TransitionDataset,
                  abstract: AbstractDataset) -> Tuple[List[PredicateDecl],
                                                      Tuple[str, ...]]:
    """One invention round.  Returned declarations are novel with respect
    to ``psi`` and to each other."""
    out: List[PredicateDecl] = []
    strategies = strategies_for(round_index)
    for strategy in strategies:
        table = psi.union(out)
        req = ProposalRequest(strategy, round_index, table, data, abstract)
        out.extend(_accept(source.propose(req), table, rename=False))
    return out, strategies
