"""Lifted high-level actions, grounding and the abstract transition
function, plus the operator listing format used for model files."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from functools import cached_property
from typing import (Dict, FrozenSet, Iterable, List, Mapping, Optional,
                    Sequence, Tuple)

from predinv.abstraction import AbstractState, DerivedCloser
from predinv.core import GroundAtom, GroundSkill, ObjectRef, ObjectType, \
    PredinvError, SkillSpec
from predinv.dsl import PredicateTable


class ModelError(PredinvError):
    pass


class ListingParseError(ModelError):
    pass


@dataclass(frozen=True, order=True)
class LiftedAtom:
    predicate: str
    vars: Tuple[str, ...]

    def ground(self, sub: Mapping[str, ObjectRef]) -> GroundAtom:
        return GroundAtom(self.predicate, tuple(sub[v] for v in self.vars))

    def __str__(self) -> str:
        return f"{self.predicate}({', '.join(self.vars)})"


@dataclass(frozen=True)
class HLA:
    """A lifted operator bound to one skill.

    ``params`` are (variable, type name) pairs; ``skill_args`` name the
    parameters passed to the skill.  With ``distinct`` set, parameters of the
    same type bind different objects.
    """
    name: str
    params: Tuple[Tuple[str, str], ...]
    skill: SkillSpec
    skill_args: Tuple[str, ...]
    pre: FrozenSet[LiftedAtom] = frozenset()
    add: FrozenSet[LiftedAtom] = frozenset()
    delete: FrozenSet[LiftedAtom] = frozenset()
    ignore: FrozenSet[LiftedAtom] = frozenset()
    distinct: bool = True

    def __post_init__(self) -> None:
        if self.add & self.delete:
            raise ModelError(f"{self.name}: add and delete effects overlap")
        names = {v for v, _ in self.params}
        if len(names) != len(self.params):
            raise ModelError(f"{self.name}: repeated parameter")
        for atom in self.pre | self.add | self.delete | self.ignore:
            if not set(atom.vars) <= names:
                raise ModelError(f"{self.name}: {atom} uses a non-parameter")
        if not set(self.skill_args) <= names:
            raise ModelError(f"{self.name}: skill uses a non-parameter")
        ptypes = dict(self.params)
        if len(self.skill_args) != len(self.skill.param_types) or any(
                ptypes[v] != t.name
                for v, t in zip(self.skill_args, self.skill.param_types)):
            raise ModelError(f"{self.name}: skill arguments do not match "
                             f"{self.skill.name}'s signature")

    @property
    def var_types(self) -> Dict[str, str]:
        return dict(self.params)

    def predicates(self) -> FrozenSet[str]:
        return frozenset(a.predicate
                         for a in self.pre | self.add | self.delete)

    def check_against(self, table: PredicateTable) -> None:
        """Effects must use primitive predicates; atoms must type-check."""
        types = self.var_types
        for atom in self.pre | self.add | self.delete:
            if atom.predicate not in table:
                raise ModelError(f"{self.name}: unknown predicate "
                                 f"{atom.predicate}")
            decl = table[atom.predicate]
            if tuple(types[v] for v in atom.vars) != decl.type_names:
                raise ModelError(f"{self.name}: {atom} is ill-typed")
        for atom in self.add | self.delete:
            if table[atom.predicate].is_derived:
                raise ModelError(f"{self.name}: derived predicate "
                                 f"{atom.predicate} in effects")


@dataclass(frozen=True)
class GroundHLA:
    hla: HLA
    binding: Tuple[ObjectRef, ...]

    @cached_property
    def sub(self) -> Dict[str, ObjectRef]:
        return {v: o for (v, _), o in zip(self.hla.params, self.binding)}

    @cached_property
    def pre(self) -> FrozenSet[GroundAtom]:
        return frozenset(a.ground(self.sub) for a in self.hla.pre)

    @cached_property
    def add(self) -> FrozenSet[GroundAtom]:
        return frozenset(a.ground(self.sub) for a in self.hla.add)

    @cached_property
    def delete(self) -> FrozenSet[GroundAtom]:
        return frozenset(a.ground(self.sub) for a in self.hla.delete)

    @cached_property
    def skill(self) -> GroundSkill:
        return GroundSkill(self.hla.skill,
                           tuple(self.sub[v] for v in self.hla.skill_args))

    def __str__(self) -> str:
        return f"{self.hla.name}({', '.join(o.name for o in self.binding)})"

    def sort_key(self) -> Tuple:
        return (self.hla.name, tuple(o.id for o in self.binding))


def bindings(params: Sequence[Tuple[str, str]], objects: Iterable[ObjectRef],
             distinct: bool = True,
             fixed: Optional[Mapping[str, ObjectRef]] = None
             ) -> Iterable[Tuple[ObjectRef, ...]]:
    """Type-consistent parameter bindings in deterministic order."""
    by_type: Dict[str, List[ObjectRef]] = {}
    for o in sorted(objects):
        by_type.setdefault(o.type.name, []).append(o)
    choices = []
    for v, t in params:
        if fixed and v in fixed:
            o = fixed[v]
            choices.append([o] if o.type.name == t else [])
        else:
            choices.append(by_type.get(t, []))
    for combo in itertools.product(*choices):
        if distinct and len(set(combo)) != len(combo):
            continue
        yield combo


def ground_all(hlas: Iterable[HLA],
               objects: Iterable[ObjectRef]) -> List[GroundHLA]:
    objects = list(objects)
    out = [GroundHLA(h, b) for h in hlas
           for b in bindings(h.params, objects, h.distinct)]
    out.sort(key=GroundHLA.sort_key)
    return out


def apply(s: AbstractState, g: GroundHLA, table: PredicateTable,
          objects: Optional[Iterable[ObjectRef]] = None,
          closer: Optional[DerivedCloser] = None) -> Optional[AbstractState]:
    """Successor under ``g``, or None when its precondition fails."""
    if not g.pre <= s.atoms:
        return None
    derived = {d.name for d in table.derived}
    prim = {a for a in s.atoms if a.predicate not in derived}
    prim = (prim - g.delete) | g.add
    if not derived:
        return AbstractState(frozenset(prim), True)
    if closer is None:
        if objects is None:
            objects = {o for a in s.atoms for o in a.args} | set(g.binding)
        closer = DerivedCloser(table, objects)
    return AbstractState(closer.close(prim), True)


# ------------------------------------------------------------ listings

def _fmt_atom(atom: LiftedAtom, types: Mapping[str, str]) -> str:
    return f"{atom.predicate}(" + ", ".join(
        f"{v}:{types[v]}" for v in atom.vars) + ")"


def format_hla(h: HLA) -> str:
    types = h.var_types
    lines = [
        f"NSRT-{h.name}:",
        "    Parameters: [" + ", ".join(f"{v}:{t}" for v, t in h.params)
        + "]",
    ]
    for label, atoms in (("Preconditions", h.pre), ("Add Effects", h.add),
                         ("Delete Effects", h.delete),
                         ("Ignore Effects", h.ignore)):
        lines.append(f"    {label}: [" + ", ".join(
            _fmt_atom(a, types) for a in sorted(atoms)) + "]")
    lines.append(f"    Option Spec: {h.skill.name}(" + ", ".join(
        f"{v}:{types[v]}" for v in h.skill_args) + ")")
    return "\n".join(lines)


def format_model(hlas: Iterable[HLA]) -> str:
    return "\n".join(format_hla(h) for h in hlas) + "\n"


_ATOM = re.compile(r"(\w+)\(([^()]*)\)")
_TYPED_VAR = re.compile(r"(\?[\w-]+)\s*:\s*([\w-]+)")


def _parse_atoms(text: str,
                 where: str) -> List[Tuple[str, List[Tuple[str, str]]]]:
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise ListingParseError(f"{where}: expected [...]")
    body = text[1:-1].strip()
    out = []
    pos = 0
    while pos < len(body):
        m = _ATOM.match(body, pos)
        if m is None:
            raise ListingParseError(f"{where}: cannot parse {body[pos:]!r}")
        args = [] if not m.group(2).strip() else [
            _typed(x, where) for x in m.group(2).split(",")]
        out.append((m.group(1), args))
        pos = m.end()
        while pos < len(body) and body[pos] in ", ":
            pos += 1
    return out


def _typed(text: str, where: str) -> Tuple[str, str]:
    m = _TYPED_VAR.fullmatch(text.strip())
    if m is None:
        raise ListingParseError(f"{where}: expected ?var:type, got {text!r}")
    return m.group(1), m.group(2)


def parse_model(text: str, skills: Mapping[str, SkillSpec],
                types: Optional[Mapping[str, ObjectType]] = None
                ) -> List[HLA]:
    """Parse operator listings (the format written by :func:`format_model`).

    Field values may wrap across lines; a field continues until the next
    ``Name:`` header.
    """
    blocks: List[Tuple[str, Dict[str, str]]] = []
    field_re = re.compile(r"^\s*(Parameters|Preconditions|Add Effects|"
                          r"Delete Effects|Ignore Effects|Option Spec)\s*:"
                          r"(.*)$")
    current: Optional[Tuple[str, Dict[str, str]]] = None
    last: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip()
        if not line.strip() or line.strip().startswith("#"):
            continue
        head = re.match(r"^\s*(?:NSRT-)?([\w-]+)\s*:\s*$", line)
        fm = field_re.match(line)
        if fm:
            if current is None:
                raise ListingParseError(f"line {lineno}: field outside an "
                                        "operator")
            last = fm.group(1)
            current[1][last] = fm.group(2).strip()
        elif head:
            current = (head.group(1), {})
            blocks.append(current)
            last = None
        elif current is not None and last is not None:
            current[1][last] += " " + line.strip()
        else:
            raise ListingParseError(f"line {lineno}: unexpected {line!r}")
    hlas = []
    for name, fields in blocks:
        missing = {"Parameters", "Preconditions", "Add Effects",
                   "Delete Effects", "Option Spec"} - set(fields)
        if missing:
            raise ListingParseError(f"{name}: missing {sorted(missing)}")
        params = [_typed(x, name) for x in
                  fields["Parameters"].strip().strip("[]").split(",")
                  if x.strip()]
        ptypes = dict(params)
        if types is not None:
            for _, t in params:
                if t not in types:
                    raise ListingParseError(f"{name}: unknown type {t}")

        def lifted(key: str) -> FrozenSet[LiftedAtom]:
            atoms = set()
            for pred, args in _parse_atoms(fields.get(key, "[]"), name):
                for v, t in args:
                    if ptypes.get(v) != t:
                        raise ListingParseError(
                            f"{name}: {v}:{t} not a parameter")
                atoms.add(LiftedAtom(pred, tuple(v for v, _ in args)))
            return frozenset(atoms)

        spec = fields["Option Spec"].rstrip(",").strip()
        sm = _ATOM.fullmatch(spec)
        if sm is None:
            raise ListingParseError(f"{name}: bad option spec {spec!r}")
        if sm.group(1) not in skills:
            raise ListingParseError(f"{name}: unknown skill {sm.group(1)}")
        sargs = [] if not sm.group(2).strip() else [
            _typed(x, name)[0] for x in sm.group(2).split(",")]
        try:
            hlas.append(HLA(name, tuple(params), skills[sm.group(1)],
                            tuple(sargs), lifted("Preconditions"),
                            lifted("Add Effects"), lifted("Delete Effects"),
                            lifted("Ignore Effects")))
        except ModelError as e:
            raise ListingParseError(str(e)) from e
    return hlas


def canonical_hla(h: HLA) -> Tuple:
    """A renaming-invariant key: parameters are renamed by their order of
    first use across the skill arguments, effects and preconditions."""
    best = None
    names = [v for v, _ in h.params]
    types = h.var_types
    # Parameters not mentioned by the skill are ordered by trying every
    # permutation within each type; operators have at most a handful.
    fixed = list(dict.fromkeys(h.skill_args))
    free = [v for v in names if v not in fixed]
    for perm in itertools.permutations(free):
        order = fixed + list(perm)
        ren = {v: f"?v{i}" for i, v in enumerate(order)}

        def conv(atoms: FrozenSet[LiftedAtom]) -> Tuple:
            return tuple(sorted((a.predicate, tuple(ren[v] for v in a.vars))
                                for a in atoms))
        key = (h.skill.name,
               tuple(sorted((ren[v], types[v]) for v in names)),
               tuple(ren[v] for v in h.skill_args),
               conv(h.add), conv(h.delete), conv(h.pre))
        if best is None or key < best:
            best = key
    return best


def models_equivalent(a: Iterable[HLA], b: Iterable[HLA]) -> bool:
    """Set equality of operators up to parameter renaming and names."""
    ka = sorted(canonical_hla(h) for h in a)
    kb = sorted(canonical_hla(h) for h in b)
    return ka == kb
