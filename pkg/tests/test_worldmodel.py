import pytest

from predinv.envs import make_domain
from predinv.worldmodel import (HLA, LiftedAtom, ModelError, bindings,
                                format_model, ground_all, models_equivalent,
                                parse_model)

from _support import objects, skill


@pytest.mark.parametrize("domain", ["cover", "blocks", "coffee", "balance",
                                    "cover_heavy"])
def test_listing_round_trip(domain):
    spec, _, _ = make_domain(domain)
    for hlas in (spec.oracle_hlas, spec.initial_hlas):
        again = parse_model(format_model(hlas), spec.skills, spec.types)
        assert models_equivalent(again, hlas)
        for h in again:
            h.check_against(spec.oracle_table)


def test_listing_format_headings():
    spec, _, _ = make_domain("blocks")
    text = format_model(spec.oracle_hlas)
    for head in ("NSRT-Op0:", "Parameters:", "Preconditions:",
                 "Add Effects:", "Delete Effects:", "Option Spec:"):
        assert head in text


def test_equivalence_is_up_to_renaming():
    sk = skill()
    a = HLA("A", (("?a", "obj"), ("?b", "obj")), sk, ("?a", "?b"),
            frozenset({LiftedAtom("P", ("?a",))}))
    b = HLA("B", (("?q", "obj"), ("?p", "obj")), sk, ("?q", "?p"),
            frozenset({LiftedAtom("P", ("?q",))}))
    c = HLA("C", (("?q", "obj"), ("?p", "obj")), sk, ("?q", "?p"),
            frozenset({LiftedAtom("P", ("?p",))}))
    assert models_equivalent([a], [b])
    assert not models_equivalent([a], [c])


def test_hla_validation():
    sk = skill()
    with pytest.raises(ModelError):
        HLA("X", (("?a", "obj"),), sk, ("?a", "?a"),
            add=frozenset({LiftedAtom("P", ("?z",))}))
    with pytest.raises(ModelError):
        HLA("X", (("?a", "obj"), ("?b", "obj")), sk, ("?a", "?b"),
            add=frozenset({LiftedAtom("P", ("?a",))}),
            delete=frozenset({LiftedAtom("P", ("?a",))}))


def test_derived_effect_rejected():
    from predinv.dsl import parse, typecheck
    from _support import TYPES
    table = typecheck(parse("""
        (primitive P (?x obj) (> (feat ?x v) 0.5))
        (derived D (?x obj) (not (holds P ?x)))"""), TYPES)
    h = HLA("A", (("?a", "obj"), ("?b", "obj")), skill(), ("?a", "?b"),
            add=frozenset({LiftedAtom("D", ("?a",))}))
    with pytest.raises(ModelError):
        h.check_against(table)


def test_bindings_distinct_and_ordered():
    o = objects(3)
    params = (("?a", "obj"), ("?b", "obj"))
    got = list(bindings(params, reversed(o)))
    assert len(got) == 6 and all(x != y for x, y in got)
    assert got == sorted(got)
    sk = skill()
    h = HLA("A", params, sk, ("?a", "?b"))
    assert len(ground_all([h], o)) == 6
