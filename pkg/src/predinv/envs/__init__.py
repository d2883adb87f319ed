"""Simulated domains: Cover, Cover Heavy, Blocks, Coffee and Balance."""

from __future__ import annotations

from typing import Tuple

from predinv.core import Environment
from predinv.envs import balance, blocks, coffee, cover
from predinv.envs.spec import (DomainSpec, TaskGenerator, UnknownDomain,
                               load_spec)

DOMAINS = ("cover", "blocks", "coffee", "cover_heavy", "balance")

_BUILDERS = {
    "cover": (lambda s: cover.CoverEnv(s), cover.sample_task),
    "cover_heavy": (lambda s: cover.CoverEnv(s, heavy=True),
                    cover.sample_task),
    "blocks": (blocks.BlocksEnv, blocks.sample_task),
    "coffee": (coffee.CoffeeEnv, coffee.sample_task),
    "balance": (balance.BalanceEnv, balance.sample_task),
}


def make_domain(name: str, seed: int = 0
                ) -> Tuple[DomainSpec, Environment, TaskGenerator]:
    if name not in _BUILDERS:
        raise UnknownDomain(f"unknown domain {name!r}; choose from "
                            + ", ".join(DOMAINS))
    spec = load_spec(name)
    make_env, sampler = _BUILDERS[name]
    return spec, make_env(spec), TaskGenerator(spec, sampler, seed)


__all__ = ["DOMAINS", "DomainSpec", "TaskGenerator", "UnknownDomain",
           "make_domain"]
