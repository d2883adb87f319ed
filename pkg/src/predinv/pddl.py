"""Export of a predicate table and operator set to PDDL text, plus a small
reader and axiom evaluator for the dialect we write.

The dialect: ``:typing``, STRIPS actions with negative effects, equality,
and ``:derived`` axioms with quantifiers and disjunction.  Counting bodies
(``count=``) have no first-order axiom form, so they are inlined for the
objects of one task: "both counts equal k" for every feasible k.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple, Union

from predinv.core import GroundAtom, PredinvError, Task
from predinv.dsl import (And, CountEq, CountSpec, Exists, Expr, Forall, Holds,
                         Not, Or, PredicateTable, Same, Truth)
from predinv.worldmodel import HLA, LiftedAtom

REQUIREMENTS = (":strips", ":typing", ":negative-preconditions",
                ":equality", ":disjunctive-preconditions",
                ":existential-preconditions", ":universal-preconditions",
                ":derived-predicates")


class PDDLError(PredinvError):
    pass


def _v(var: str) -> str:
    return var if var.startswith("?") else "?" + var


def _typed(params: Sequence[Tuple[str, str]]) -> str:
    return " ".join(f"{_v(v)} - {t}" for v, t in params)


class _Fresh:
    def __init__(self) -> None:
        self.n = 0

    def __call__(self) -> str:
        self.n += 1
        return f"?c{self.n}"


def _at_least(k: int, spec: CountSpec, env: Dict[str, str],
              ctype: str, fresh: _Fresh) -> str:
    """At least ``k`` distinct objects fill the counted slot."""
    if k == 0:
        return "(and)"
    vs = [fresh() for _ in range(k)]
    parts = []
    for a, b in itertools.combinations(vs, 2):
        parts.append(f"(not (= {a} {b}))")
    for c in vs:
        args = [c if a is None else env.get(a, _v(a)) for a in spec.args]
        parts.append(f"({spec.pred} {' '.join(args)})")
    decl = " ".join(f"{c} - {ctype}" for c in vs)
    return f"(exists ({decl}) (and {' '.join(parts)}))"


def _count_eq(expr: CountEq, env: Dict[str, str], table: PredicateTable,
              counts: Dict[str, int], fresh: _Fresh) -> str:
    def ctype(spec: CountSpec) -> str:
        i = spec.args.index(None)
        return table[spec.pred].type_names[i]

    lt, rt = ctype(expr.left), ctype(expr.right)
    top = min(counts.get(lt, 0), counts.get(rt, 0))
    cases = []
    for k in range(top + 1):
        cases.append(
            "(and " + _at_least(k, expr.left, env, lt, fresh)
            + f" (not {_at_least(k + 1, expr.left, env, lt, fresh)})"
            + " " + _at_least(k, expr.right, env, rt, fresh)
            + f" (not {_at_least(k + 1, expr.right, env, rt, fresh)}))")
    return "(or " + " ".join(cases) + ")"


def _formula(expr: Expr, table: PredicateTable, counts: Dict[str, int],
             fresh: _Fresh, env: Optional[Dict[str, str]] = None) -> str:
    env = env or {}
    if isinstance(expr, Holds):
        return f"({expr.pred} " + " ".join(_v(v) for v in expr.vars) + ")" \
            if expr.vars else f"({expr.pred})"
    if isinstance(expr, And):
        return "(and " + " ".join(_formula(x, table, counts, fresh, env)
                                  for x in expr.items) + ")"
    if isinstance(expr, Or):
        return "(or " + " ".join(_formula(x, table, counts, fresh, env)
                                 for x in expr.items) + ")"
    if isinstance(expr, Not):
        return f"(not {_formula(expr.item, table, counts, fresh, env)})"
    if isinstance(expr, (Exists, Forall)):
        q = "exists" if isinstance(expr, Exists) else "forall"
        return (f"({q} ({_v(expr.var)} - {expr.type}) "
                f"{_formula(expr.body, table, counts, fresh, env)})")
    if isinstance(expr, Same):
        return f"(= {_v(expr.a)} {_v(expr.b)})"
    if isinstance(expr, Truth):
        return "(and)" if expr.value else "(or)"
    if isinstance(expr, CountEq):
        return _count_eq(expr, env, table, counts, fresh)
    raise PDDLError(f"no PDDL form for {type(expr).__name__}")


def _atom(a: Union[LiftedAtom, GroundAtom], names=None) -> str:
    if isinstance(a, LiftedAtom):
        args = [_v(v) for v in a.vars]
    else:
        args = [names[o] if names else o.name for o in a.args]
    return f"({a.predicate}" + "".join(" " + x for x in args) + ")"


def export_domain(table: PredicateTable, hlas: Sequence[HLA],
                  task: Optional[Task] = None, name: str = "predinv") -> str:
    """Domain text.  Counting axioms need ``task`` for its object counts."""
    counts: Dict[str, int] = {}
    if task is not None:
        for o in task.objects:
            counts[o.type.name] = counts.get(o.type.name, 0) + 1
    types = sorted(table.types)
    lines = [f"(define (domain {name})",
             "  (:requirements " + " ".join(REQUIREMENTS) + ")",
             "  (:types " + " ".join(types) + ")",
             "  (:predicates"]
    for n in sorted(table.names):
        d = table[n]
        typed = "".join(f" {_v(v)} - {t}" for v, t in d.params)
        lines.append(f"    ({n}{typed})")
    lines.append("  )")
    fresh = _Fresh()
    for stratum in table.strata:
        for n in stratum:
            d = table[n]
            has_count = any(isinstance(x, CountEq) for x in _walk(d.body))
            if has_count and task is None:
                raise PDDLError(f"{n} counts objects; export it per task")
            head = f"({n}" + "".join(f" {_v(v)} - {t}"
                                     for v, t in d.params) + ")"
            lines.append(f"  (:derived {head}")
            lines.append("    " + _formula(d.body, table, counts, fresh) + ")")
    for h in sorted(hlas, key=lambda h: h.name):
        pre = [_atom(a) for a in sorted(h.pre)]
        if h.distinct:
            for (a, ta), (b, tb) in itertools.combinations(h.params, 2):
                if ta == tb:
                    pre.append(f"(not (= {_v(a)} {_v(b)}))")
        eff = [_atom(a) for a in sorted(h.add)]
        eff += [f"(not {_atom(a)})" for a in sorted(h.delete)]
        skill = f"{h.skill.name}(" + ", ".join(h.skill_args) + ")"
        lines += [f"  ; skill {skill}",
                  f"  (:action {h.name}",
                  f"    :parameters ({_typed(h.params)})",
                  "    :precondition (and " + " ".join(pre) + ")",
                  "    :effect (and " + " ".join(eff) + "))"]
    lines.append(")")
    return "\n".join(lines) + "\n"


def _walk(expr: Expr):
    yield expr
    if isinstance(expr, (And, Or)):
        for x in expr.items:
            yield from _walk(x)
    elif isinstance(expr, Not):
        yield from _walk(expr.item)
    elif isinstance(expr, (Exists, Forall)):
        yield from _walk(expr.body)


def export_problem(task: Task, init: FrozenSet[GroundAtom],
                   domain: str = "predinv", name: str = "task") -> str:
    """Problem text over the primitive atoms ``init``."""
    by_type: Dict[str, List[str]] = {}
    for o in sorted(task.objects, key=lambda o: o.id):
        by_type.setdefault(o.type.name, []).append(o.name)
    objs = " ".join(" ".join(ns) + f" - {t}"
                    for t, ns in sorted(by_type.items()))
    lines = [f"(define (problem {name})", f"  (:domain {domain})",
             f"  (:objects {objs})",
             "  (:init " + " ".join(_atom(a) for a in sorted(init)) + ")",
             "  (:goal (and " + " ".join(_atom(a) for a in sorted(task.goal))
             + ")))"]
    return "\n".join(lines) + "\n"


def export_planning_model(table: PredicateTable, hlas: Sequence[HLA],
                          task: Task, init: FrozenSet[GroundAtom],
                          name: str = "predinv") -> Tuple[str, str]:
    """(domain, problem) for one task.  Derived atoms are left out of the
    problem's init; the axioms recompute them."""
    derived = {d.name for d in table.derived}
    prim = frozenset(a for a in init if a.predicate not in derived)
    return (export_domain(table, hlas, task, name),
            export_problem(task, prim, name, f"task{task.task_id}"))


# ------------------------------------------------------------ reading

_TOK = re.compile(r";[^\n]*|\(|\)|[^\s()]+")

SExpr = Union[str, list]


def read_sexpr(text: str) -> SExpr:
    stack: List[list] = [[]]
    for m in _TOK.finditer(text):
        t = m.group()
        if t.startswith(";"):
            continue
        if t == "(":
            stack.append([])
        elif t == ")":
            if len(stack) == 1:
                raise PDDLError("unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(t)
    if len(stack) != 1 or len(stack[0]) != 1:
        raise PDDLError("expected exactly one top-level form")
    return stack[0][0]


def _typed_list(items: Sequence[str]) -> List[Tuple[str, str]]:
    out, pending = [], []
    it = iter(items)
    for x in it:
        if x == "-":
            t = next(it)
            out += [(v, t) for v in pending]
            pending = []
        else:
            pending.append(x)
    if pending:
        raise PDDLError(f"untyped names {pending}")
    return out


@dataclass
class ParsedAction:
    name: str
    params: List[Tuple[str, str]]
    pre: SExpr
    effect: SExpr


@dataclass
class ParsedDomain:
    name: str
    types: List[str]
    predicates: Dict[str, List[Tuple[str, str]]]
    axioms: List[Tuple[str, List[Tuple[str, str]], SExpr]]
    actions: List[ParsedAction] = field(default_factory=list)


@dataclass
class ParsedProblem:
    name: str
    objects: List[Tuple[str, str]]
    init: Set[Tuple[str, ...]]
    goal: SExpr


def parse_domain(text: str) -> ParsedDomain:
    form = read_sexpr(text)
    if not (isinstance(form, list) and form[:1] == ["define"]):
        raise PDDLError("not a define form")
    name = form[1][1]
    dom = ParsedDomain(name, [], {}, [])
    for sec in form[2:]:
        key = sec[0]
        if key == ":types":
            dom.types = list(sec[1:])
        elif key == ":predicates":
            for p in sec[1:]:
                dom.predicates[p[0]] = _typed_list(p[1:])
        elif key == ":derived":
            head = sec[1]
            dom.axioms.append((head[0], _typed_list(head[1:]), sec[2]))
        elif key == ":action":
            kv = dict(zip(sec[2::2], sec[3::2]))
            dom.actions.append(ParsedAction(
                sec[1], _typed_list(kv[":parameters"]),
                kv[":precondition"], kv[":effect"]))
        elif key != ":requirements":
            raise PDDLError(f"unknown domain section {key}")
    return dom


def parse_problem(text: str) -> ParsedProblem:
    form = read_sexpr(text)
    name = form[1][1]
    prob = ParsedProblem(name, [], set(), ["and"])
    for sec in form[2:]:
        key = sec[0]
        if key == ":objects":
            prob.objects = _typed_list(sec[1:])
        elif key == ":init":
            prob.init = {tuple(a) for a in sec[1:]}
        elif key == ":goal":
            prob.goal = sec[1]
        elif key != ":domain":
            raise PDDLError(f"unknown problem section {key}")
    return prob


def evaluate(f: SExpr, atoms: Set[Tuple[str, ...]],
             objects: Dict[str, List[str]], env: Dict[str, str]) -> bool:
    """Truth of formula ``f`` over ground tuples ``atoms``."""
    head = f[0]
    if head == "and":
        return all(evaluate(x, atoms, objects, env) for x in f[1:])
    if head == "or":
        return any(evaluate(x, atoms, objects, env) for x in f[1:])
    if head == "not":
        return not evaluate(f[1], atoms, objects, env)
    if head == "=":
        return env.get(f[1], f[1]) == env.get(f[2], f[2])
    if head in ("exists", "forall"):
        vs = _typed_list(f[1])
        quant = any if head == "exists" else all
        domains = [objects.get(t, []) for _, t in vs]
        return quant(
            evaluate(f[2], atoms, objects,
                     {**env, **{v: o for (v, _), o in zip(vs, combo)}})
            for combo in itertools.product(*domains))
    return (head,) + tuple(env.get(a, a) for a in f[1:]) in atoms


def _refs(f: SExpr, out: Set[str]) -> Set[str]:
    if isinstance(f, list) and f:
        if isinstance(f[0], str) and f[0] not in (
                "and", "or", "not", "=", "exists", "forall"):
            out.add(f[0])
        for x in f[1:] if f[0] not in ("exists", "forall") else f[2:]:
            _refs(x, out)
    return out


def close_axioms(dom: ParsedDomain, atoms: Set[Tuple[str, ...]],
                 objects: Dict[str, List[str]]) -> Set[Tuple[str, ...]]:
    """Add every derived atom, one group of mutually recursive axioms at a
    time in declaration order (the exporter writes them stratified)."""
    heads = [a[0] for a in dom.axioms]
    deps = {h: _refs(body, set()) & set(heads) for h, _, body in dom.axioms}
    reach = {h: set(deps[h]) for h in heads}
    changed = True
    while changed:
        changed = False
        for h in heads:
            extra = set().union(*(reach[d] for d in reach[h])) - reach[h]
            if extra:
                reach[h] |= extra
                changed = True
    out = set(atoms)
    done: Set[str] = set()
    for h in heads:
        if h in done:
            continue
        group = [a for a in dom.axioms
                 if a[0] == h or (a[0] in reach[h] and h in reach[a[0]])]
        done.update(a[0] for a in group)
        grew = True
        while grew:
            grew = False
            for name, params, body in group:
                domains = [objects.get(t, []) for _, t in params]
                for combo in itertools.product(*domains):
                    key = (name,) + combo
                    if key in out:
                        continue
                    env = {v: o for (v, _), o in zip(params, combo)}
                    if evaluate(body, out, objects, env):
                        out.add(key)
                        grew = True
    return out
