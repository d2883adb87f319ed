"""S-expression language for primitive and derived predicates.

A file holds any number of declarations::

    ; comments run to end of line
    (primitive GripperOpen (?r robot) (> (feat ?r fingers) 0.5))
    (derived Clear (?b block) (not (exists (?x block) (holds On ?x ?b))))

Primitive bodies read object features and ask the perceptual oracle
(``assert``); derived bodies only read the truth values of other predicates
(``holds``, ``count=``).
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import (Callable, Dict, FrozenSet, Iterable, List, Mapping,
                    Optional, Sequence, Set, Tuple, Union)

from predinv.core import (FeatureState, GroundAtom, ObjectRef, ObjectType,
                          PredinvError)

EQ_EPSILON = 1e-9


class DSLError(PredinvError):
    pass


class DSLSyntaxError(DSLError):
    def __init__(self, msg: str, line: int = 0, col: int = 0) -> None:
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


class DuplicateDeclaration(DSLError):
    pass


class WellFormednessError(DSLError):
    pass


class DSLTypeError(DSLError):
    pass


class UnknownType(DSLTypeError):
    pass


class UnknownFeature(DSLTypeError):
    pass


class UnknownPredicate(DSLTypeError):
    pass


class UnstratifiedNegation(DSLTypeError):
    def __init__(self, cycle: Sequence[str]) -> None:
        super().__init__("negation or counting on a cycle: "
                         + " -> ".join(cycle))
        self.cycle = tuple(cycle)


class Kind(enum.Enum):
    PRIMITIVE = "primitive"
    DERIVED = "derived"


# --------------------------------------------------------------------- AST

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Feat:
    var: str
    feature: str


NumExpr = Union[Const, Feat]


@dataclass(frozen=True)
class Truth:
    value: bool


@dataclass(frozen=True)
class Compare:
    op: str
    lhs: NumExpr
    rhs: NumExpr


@dataclass(frozen=True)
class OracleAssert:
    template: str
    vars: Tuple[str, ...]


@dataclass(frozen=True)
class And:
    items: Tuple["Expr", ...]


@dataclass(frozen=True)
class Or:
    items: Tuple["Expr", ...]


@dataclass(frozen=True)
class Not:
    item: "Expr"


@dataclass(frozen=True)
class Holds:
    pred: str
    vars: Tuple[str, ...]


@dataclass(frozen=True)
class Exists:
    var: str
    type: str
    body: "Expr"


@dataclass(frozen=True)
class Forall:
    var: str
    type: str
    body: "Expr"


@dataclass(frozen=True)
class CountSpec:
    """Atoms of ``pred`` whose non-counted positions equal ``args``.

    ``args`` holds ``None`` at the single counted position.
    """
    pred: str
    args: Tuple[Optional[str], ...]


@dataclass(frozen=True)
class CountEq:
    left: CountSpec
    right: CountSpec


@dataclass(frozen=True)
class Same:
    a: str
    b: str


Expr = Union[Truth, Compare, OracleAssert, And, Or, Not, Holds, Exists,
             Forall, CountEq, Same]

COMPARE_OPS = ("<", "<=", "=", ">=", ">")


@dataclass(frozen=True)
class PredicateDecl:
    name: str
    params: Tuple[Tuple[str, str], ...]  # (variable, type name)
    kind: Kind
    body: Expr

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def type_names(self) -> Tuple[str, ...]:
        return tuple(t for _, t in self.params)

    @property
    def is_derived(self) -> bool:
        return self.kind is Kind.DERIVED

    def __str__(self) -> str:
        return pretty(self)


# ------------------------------------------------------------------ reader

_TOKEN = re.compile(r'\s+|;[^\n]*|\(|\)|"(?:[^"\\]|\\.)*"|[^\s()";]+')


@dataclass
class _Tok:
    text: str
    line: int
    col: int


@dataclass
class _List:
    items: List[Union["_List", _Tok]]
    line: int
    col: int


def _tokenize(text: str) -> List[_Tok]:
    toks: List[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise DSLSyntaxError(f"unexpected character {text[pos]!r}", line,
                                 pos - line_start + 1)
        tok = m.group(0)
        if tok.startswith('"') and (len(tok) < 2 or not tok.endswith('"')):
            raise DSLSyntaxError("unterminated string", line,
                                 pos - line_start + 1)
        if not tok.isspace() and not tok.startswith(";"):
            toks.append(_Tok(tok, line, pos - line_start + 1))
        for i, ch in enumerate(tok):
            if ch == "\n":
                line += 1
                line_start = pos + i + 1
        pos = m.end()
    return toks


def _read(text: str) -> List[_List]:
    toks = _tokenize(text)
    stack: List[_List] = []
    top: List[_List] = []
    for tok in toks:
        if tok.text == "(":
            stack.append(_List([], tok.line, tok.col))
        elif tok.text == ")":
            if not stack:
                raise DSLSyntaxError("unbalanced ')'", tok.line, tok.col)
            done = stack.pop()
            if stack:
                stack[-1].items.append(done)
            else:
                top.append(done)
        else:
            if not stack:
                raise DSLSyntaxError(f"bare token {tok.text!r} at top level",
                                     tok.line, tok.col)
            stack[-1].items.append(tok)
    if stack:
        raise DSLSyntaxError("unbalanced '('", stack[-1].line, stack[-1].col)
    return top


# ------------------------------------------------------------------ parser

def _err(node: Union[_List, _Tok], msg: str) -> DSLSyntaxError:
    return DSLSyntaxError(msg, node.line, node.col)


def _sym(node: Union[_List, _Tok], what: str = "symbol") -> str:
    if not isinstance(node, _Tok) or node.text.startswith('"'):
        raise _err(node, f"expected {what}")
    return node.text


def _var(node: Union[_List, _Tok]) -> str:
    name = _sym(node, "variable")
    if not name.startswith("?") or len(name) < 2:
        raise _err(node, f"expected variable, got {name!r}")
    return name


def _head(node: _List) -> str:
    if not node.items:
        raise _err(node, "empty form")
    return _sym(node.items[0], "form name")


def _num(node: Union[_List, _Tok]) -> NumExpr:
    if isinstance(node, _Tok):
        try:
            return Const(float(node.text))
        except ValueError:
            raise _err(node, f"expected number, got {node.text!r}") from None
    if _head(node) != "feat" or len(node.items) != 3:
        raise _err(node, "expected (feat ?var name) or a number")
    return Feat(_var(node.items[1]), _sym(node.items[2], "feature name"))


def _count_spec(node: Union[_List, _Tok]) -> CountSpec:
    if not isinstance(node, _List) or _head(node) != "count":
        raise _err(node, "expected (count Pred args...)")
    if len(node.items) < 3:
        raise _err(node, "count needs a predicate and arguments")
    args: List[Optional[str]] = []
    for item in node.items[2:]:
        args.append(None if _sym(item) == "_" else _var(item))
    if args.count(None) != 1:
        raise _err(node, "count needs exactly one counted position '_'")
    return CountSpec(_sym(node.items[1], "predicate name"), tuple(args))


def _expr(node: Union[_List, _Tok]) -> Expr:
    if isinstance(node, _Tok):
        if node.text == "true":
            return Truth(True)
        if node.text == "false":
            return Truth(False)
        raise _err(node, f"unexpected token {node.text!r}")
    head = _head(node)
    rest = node.items[1:]
    if head in ("and", "or"):
        items = tuple(_expr(x) for x in rest)
        return And(items) if head == "and" else Or(items)
    if head == "not":
        if len(rest) != 1:
            raise _err(node, "not takes one argument")
        return Not(_expr(rest[0]))
    if head in COMPARE_OPS:
        if len(rest) != 2:
            raise _err(node, f"{head} takes two arguments")
        return Compare(head, _num(rest[0]), _num(rest[1]))
    if head == "assert":
        if not rest or not isinstance(rest[0], _Tok) \
                or not rest[0].text.startswith('"'):
            raise _err(node, "assert needs a template string")
        template = rest[0].text[1:-1].replace('\\"', '"')
        return OracleAssert(template, tuple(_var(x) for x in rest[1:]))
    if head == "holds":
        if not rest:
            raise _err(node, "holds needs a predicate name")
        return Holds(_sym(rest[0], "predicate name"),
                     tuple(_var(x) for x in rest[1:]))
    if head in ("exists", "forall"):
        if len(rest) != 2 or not isinstance(rest[0], _List) \
                or len(rest[0].items) != 2:
            raise _err(node, f"expected ({head} (?x type) body)")
        var, tname = _var(rest[0].items[0]), _sym(rest[0].items[1], "type")
        body = _expr(rest[1])
        return Exists(var, tname, body) if head == "exists" \
            else Forall(var, tname, body)
    if head == "count=":
        if len(rest) != 2:
            raise _err(node, "count= takes two count specs")
        return CountEq(_count_spec(rest[0]), _count_spec(rest[1]))
    if head == "same":
        if len(rest) != 2:
            raise _err(node, "same takes two variables")
        return Same(_var(rest[0]), _var(rest[1]))
    raise _err(node, f"unknown form {head!r}")


def _decl(node: _List) -> PredicateDecl:
    head = _head(node)
    if head not in ("primitive", "derived"):
        raise _err(node, "expected (primitive ...) or (derived ...)")
    if len(node.items) != 4:
        raise _err(node, f"expected ({head} Name (params) body)")
    name = _sym(node.items[1], "predicate name")
    plist = node.items[2]
    if not isinstance(plist, _List) or len(plist.items) % 2:
        raise _err(plist, "parameters must be (?var type ...)")
    params = tuple((_var(plist.items[i]), _sym(plist.items[i + 1], "type"))
                   for i in range(0, len(plist.items), 2))
    if len({v for v, _ in params}) != len(params):
        raise _err(plist, "repeated parameter variable")
    decl = PredicateDecl(name, params, Kind(head), _expr(node.items[3]))
    _check_well_formed(decl, node)
    return decl


def parse(text: str) -> List[PredicateDecl]:
    """Parse predicate declarations from source text."""
    decls: List[PredicateDecl] = []
    seen: Set[str] = set()
    for node in _read(text):
        decl = _decl(node)
        if decl.name in seen:
            raise DuplicateDeclaration(
                f"{node.line}:{node.col}: duplicate declaration {decl.name}")
        seen.add(decl.name)
        decls.append(decl)
    return decls


def parse_one(text: str) -> PredicateDecl:
    decls = parse(text)
    if len(decls) != 1:
        raise DSLSyntaxError(f"expected one declaration, got {len(decls)}")
    return decls[0]


def walk(expr: Expr) -> Iterable[Expr]:
    yield expr
    if isinstance(expr, (And, Or)):
        for item in expr.items:
            yield from walk(item)
    elif isinstance(expr, Not):
        yield from walk(expr.item)
    elif isinstance(expr, (Exists, Forall)):
        yield from walk(expr.body)


def _check_well_formed(decl: PredicateDecl, node: _List) -> None:
    for sub in walk(decl.body):
        if decl.kind is Kind.PRIMITIVE and isinstance(sub, (Holds, CountEq)):
            raise WellFormednessError(
                f"{node.line}:{node.col}: primitive {decl.name} may not "
                "reference other predicates")
        if decl.kind is Kind.DERIVED and isinstance(sub,
                                                    (Compare, OracleAssert)):
            raise WellFormednessError(
                f"{node.line}:{node.col}: derived {decl.name} may not read "
                "features or query the oracle")
    _check_bound(decl.body, {v for v, _ in decl.params}, decl.name)


def _expr_vars(expr: Expr) -> Iterable[str]:
    if isinstance(expr, Compare):
        for side in (expr.lhs, expr.rhs):
            if isinstance(side, Feat):
                yield side.var
    elif isinstance(expr, (OracleAssert, Holds)):
        yield from expr.vars
    elif isinstance(expr, CountEq):
        for spec in (expr.left, expr.right):
            yield from (a for a in spec.args if a is not None)
    elif isinstance(expr, Same):
        yield expr.a
        yield expr.b


def _check_bound(expr: Expr, bound: Set[str], name: str) -> None:
    if isinstance(expr, (And, Or)):
        for item in expr.items:
            _check_bound(item, bound, name)
    elif isinstance(expr, Not):
        _check_bound(expr.item, bound, name)
    elif isinstance(expr, (Exists, Forall)):
        _check_bound(expr.body, bound | {expr.var}, name)
    else:
        for v in _expr_vars(expr):
            if v not in bound:
                raise WellFormednessError(f"{name}: unbound variable {v}")


# ---------------------------------------------------------- pretty printer

def _fmt_num(n: NumExpr) -> str:
    if isinstance(n, Feat):
        return f"(feat {n.var} {n.feature})"
    if n.value.is_integer() and abs(n.value) < 1e15:
        return str(int(n.value))
    return repr(n.value)


def pretty_expr(expr: Expr) -> str:
    if isinstance(expr, Truth):
        return "true" if expr.value else "false"
    if isinstance(expr, Compare):
        return f"({expr.op} {_fmt_num(expr.lhs)} {_fmt_num(expr.rhs)})"
    if isinstance(expr, OracleAssert):
        tmpl = expr.template.replace('"', '\\"')
        return " ".join([f'(assert "{tmpl}"', *expr.vars]) + ")"
    if isinstance(expr, (And, Or)):
        head = "and" if isinstance(expr, And) else "or"
        return "(" + " ".join([head] + [pretty_expr(x)
                                        for x in expr.items]) + ")"
    if isinstance(expr, Not):
        return f"(not {pretty_expr(expr.item)})"
    if isinstance(expr, Holds):
        return "(" + " ".join(["holds", expr.pred, *expr.vars]) + ")"
    if isinstance(expr, (Exists, Forall)):
        head = "exists" if isinstance(expr, Exists) else "forall"
        return f"({head} ({expr.var} {expr.type}) {pretty_expr(expr.body)})"
    if isinstance(expr, CountEq):
        return f"(count= {_fmt_count(expr.left)} {_fmt_count(expr.right)})"
    if isinstance(expr, Same):
        return f"(same {expr.a} {expr.b})"
    raise TypeError(f"not an expression: {expr!r}")


def _fmt_count(spec: CountSpec) -> str:
    args = ["_" if a is None else a for a in spec.args]
    return "(" + " ".join(["count", spec.pred, *args]) + ")"


def pretty(decl: PredicateDecl) -> str:
    params = " ".join(f"{v} {t}" for v, t in decl.params)
    return (f"({decl.kind.value} {decl.name} ({params}) "
            f"{pretty_expr(decl.body)})")


# ------------------------------------------------------- alpha-equivalence

def canonical_body(decl: PredicateDecl) -> Tuple[Tuple[str, ...], str]:
    """Body text with variables renamed by first occurrence.

    Two declarations with equal canonical bodies define the same predicate up
    to variable renaming (their names may differ).
    """
    mapping: Dict[str, str] = {}
    for i, (v, _) in enumerate(decl.params):
        mapping[v] = f"?p{i}"
    counter = [0]

    def rename(expr: Expr) -> Expr:
        if isinstance(expr, (Exists, Forall)):
            new = f"?q{counter[0]}"
            counter[0] += 1
            old = mapping.get(expr.var)
            mapping[expr.var] = new
            body = rename(expr.body)
            if old is None:
                del mapping[expr.var]
            else:
                mapping[expr.var] = old
            return type(expr)(new, expr.type, body)
        if isinstance(expr, (And, Or)):
            return type(expr)(tuple(rename(x) for x in expr.items))
        if isinstance(expr, Not):
            return Not(rename(expr.item))
        if isinstance(expr, Compare):
            return Compare(expr.op, _rn_num(expr.lhs), _rn_num(expr.rhs))
        if isinstance(expr, OracleAssert):
            return OracleAssert(expr.template,
                                tuple(mapping[v] for v in expr.vars))
        if isinstance(expr, Holds):
            return Holds(expr.pred, tuple(mapping[v] for v in expr.vars))
        if isinstance(expr, CountEq):
            return CountEq(_rn_count(expr.left), _rn_count(expr.right))
        if isinstance(expr, Same):
            return Same(mapping[expr.a], mapping[expr.b])
        return expr

    def _rn_num(n: NumExpr) -> NumExpr:
        return Feat(mapping[n.var], n.feature) if isinstance(n, Feat) else n

    def _rn_count(spec: CountSpec) -> CountSpec:
        return CountSpec(spec.pred, tuple(None if a is None else mapping[a]
                                          for a in spec.args))

    body = pretty_expr(rename(decl.body))
    return decl.type_names, f"{decl.kind.value}:{body}"


# -------------------------------------------------------------- typechecker

def references(decl: PredicateDecl) -> Dict[str, bool]:
    """Predicates referenced by ``decl`` -> whether any reference is
    non-monotone (under negation or inside a count)."""
    refs: Dict[str, bool] = {}

    def visit(expr: Expr, negative: bool) -> None:
        if isinstance(expr, Holds):
            refs[expr.pred] = refs.get(expr.pred, False) or negative
        elif isinstance(expr, CountEq):
            for spec in (expr.left, expr.right):
                refs[spec.pred] = True
        elif isinstance(expr, (And, Or)):
            for item in expr.items:
                visit(item, negative)
        elif isinstance(expr, Not):
            visit(expr.item, True)
        elif isinstance(expr, (Exists, Forall)):
            visit(expr.body, negative)

    visit(decl.body, False)
    return refs


@dataclass(frozen=True)
class PredicateTable:
    """A typechecked, stratified set of predicate declarations.

    ``strata`` lists the derived predicates in evaluation order; each inner
    tuple is one strongly connected component.
    """
    decls: Mapping[str, PredicateDecl]
    types: Mapping[str, ObjectType]
    strata: Tuple[Tuple[str, ...], ...] = ()

    def __contains__(self, name: object) -> bool:
        return name in self.decls

    def __getitem__(self, name: str) -> PredicateDecl:
        return self.decls[name]

    def __iter__(self):
        return iter(sorted(self.decls))

    def __len__(self) -> int:
        return len(self.decls)

    @property
    def names(self) -> FrozenSet[str]:
        return frozenset(self.decls)

    @property
    def primitives(self) -> List[PredicateDecl]:
        return [self.decls[n] for n in sorted(self.decls)
                if not self.decls[n].is_derived]

    @property
    def derived(self) -> List[PredicateDecl]:
        return [self.decls[n] for n in sorted(self.decls)
                if self.decls[n].is_derived]

    def subset(self, names: Iterable[str]) -> "PredicateTable":
        """Restrict to ``names`` plus everything they depend on."""
        keep = dependency_closure(self.decls, names)
        return typecheck([self.decls[n] for n in sorted(keep)], self.types)

    def union(self, decls: Iterable[PredicateDecl]) -> "PredicateTable":
        merged = dict(self.decls)
        for d in decls:
            merged[d.name] = d
        return typecheck(list(merged.values()), self.types)


def dependency_closure(decls: Mapping[str, PredicateDecl],
                       names: Iterable[str]) -> Set[str]:
    keep: Set[str] = set()
    todo = list(names)
    while todo:
        n = todo.pop()
        if n in keep:
            continue
        if n not in decls:
            raise UnknownPredicate(f"unknown predicate {n}")
        keep.add(n)
        todo.extend(references(decls[n]))
    return keep


def typecheck(decls: Sequence[PredicateDecl],
              types: Mapping[str, ObjectType]) -> PredicateTable:
    """Resolve types, features and predicate references; stratify."""
    table: Dict[str, PredicateDecl] = {}
    for d in decls:
        if d.name in table and table[d.name] != d:
            raise DuplicateDeclaration(f"duplicate declaration {d.name}")
        table[d.name] = d
    for d in table.values():
        _typecheck_decl(d, table, types)
    strata = _stratify(table)
    return PredicateTable(table, dict(types), strata)


def _typecheck_decl(decl: PredicateDecl, table: Mapping[str, PredicateDecl],
                    types: Mapping[str, ObjectType]) -> None:
    env: Dict[str, str] = {}
    for v, t in decl.params:
        if t not in types:
            raise UnknownType(f"{decl.name}: unknown type {t}")
        env[v] = t

    def check_args(pred: str, args: Sequence[Optional[str]],
                   scope: Mapping[str, str]) -> None:
        if pred not in table:
            raise UnknownPredicate(f"{decl.name}: unknown predicate {pred}")
        target = table[pred]
        if len(args) != target.arity:
            raise DSLTypeError(
                f"{decl.name}: {pred} takes {target.arity} argument(s)")
        for a, (_, t) in zip(args, target.params):
            if a is not None and scope[a] != t:
                raise DSLTypeError(
                    f"{decl.name}: {a} has type {scope[a]}, {pred} wants {t}")

    def visit(expr: Expr, scope: Dict[str, str]) -> None:
        if isinstance(expr, Compare):
            for side in (expr.lhs, expr.rhs):
                if isinstance(side, Feat):
                    t = types[scope[side.var]]
                    if side.feature not in t.feature_names:
                        raise UnknownFeature(
                            f"{decl.name}: type {t.name} has no feature "
                            f"{side.feature}")
            if expr.op not in COMPARE_OPS:
                raise DSLTypeError(f"{decl.name}: bad operator {expr.op}")
        elif isinstance(expr, OracleAssert):
            n = len(set(re.findall(r"\{(\d+)\}", expr.template)))
            if n != len(expr.vars):
                raise DSLTypeError(f"{decl.name}: template placeholders do "
                                   "not match arguments")
        elif isinstance(expr, Holds):
            check_args(expr.pred, expr.vars, scope)
        elif isinstance(expr, CountEq):
            check_args(expr.left.pred, expr.left.args, scope)
            check_args(expr.right.pred, expr.right.args, scope)
        elif isinstance(expr, (And, Or)):
            for item in expr.items:
                visit(item, scope)
        elif isinstance(expr, Not):
            visit(expr.item, scope)
        elif isinstance(expr, (Exists, Forall)):
            if expr.type not in types:
                raise UnknownType(f"{decl.name}: unknown type {expr.type}")
            visit(expr.body, {**scope, expr.var: expr.type})

    visit(decl.body, env)


def _stratify(table: Mapping[str, PredicateDecl]) -> Tuple[Tuple[str, ...],
                                                           ...]:
    derived = sorted(n for n, d in table.items() if d.is_derived)
    edges: Dict[str, Dict[str, bool]] = {
        n: {m: neg for m, neg in references(table[n]).items()
            if table[m].is_derived}
        for n in derived}
    # Tarjan's SCC; components come out in reverse topological order, i.e.
    # dependencies before dependents.
    index: Dict[str, int] = {}
    low: Dict[str, int] = {}
    on_stack: Set[str] = set()
    stack: List[str] = []
    comps: List[Tuple[str, ...]] = []
    counter = [0]

    def strongconnect(v: str) -> None:
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        for w in sorted(edges[v]):
            if w not in index:
                strongconnect(w)
                low[v] = min(low[v], low[w])
            elif w in on_stack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on_stack.discard(w)
                comp.append(w)
                if w == v:
                    break
            comps.append(tuple(sorted(comp)))

    for v in derived:
        if v not in index:
            strongconnect(v)
    for comp in comps:
        members = set(comp)
        for v in comp:
            for w, negative in edges[v].items():
                if negative and w in members:
                    raise UnstratifiedNegation([v, w] if v != w else [v, v])
    return tuple(comps)


# --------------------------------------------------------------- evaluation

AtomIndex = Mapping[str, Set[Tuple[ObjectRef, ...]]]
Env = Dict[str, ObjectRef]


def _type_ok(objs: Sequence[ObjectRef], decl: PredicateDecl) -> bool:
    return len(objs) == decl.arity and all(
        o.type.name == t for o, (_, t) in zip(objs, decl.params))


def _compare(op: str, a: float, b: float, eps: float) -> bool:
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == "=":
        return abs(a - b) <= eps
    if op == ">=":
        return a >= b
    return a > b


class PrimitiveEvaluator:
    """Evaluates primitive bodies on a feature state through a perceiver."""

    def __init__(self, state: FeatureState, perceiver, ctx,
                 eps: float = EQ_EPSILON) -> None:
        self.state = state
        self.perceiver = perceiver
        self.ctx = ctx
        self.eps = eps
        self._by_type: Dict[str, Tuple[ObjectRef, ...]] = {}
        for o in state.objects:
            self._by_type.setdefault(o.type.name, ())
            self._by_type[o.type.name] += (o,)

    def objects_of(self, tname: str) -> Tuple[ObjectRef, ...]:
        return self._by_type.get(tname, ())

    def num(self, n: NumExpr, env: Env) -> float:
        if isinstance(n, Const):
            return n.value
        return self.state.get(env[n.var], n.feature)

    def holds(self, decl: PredicateDecl, args: Sequence[ObjectRef]) -> bool:
        if not _type_ok(args, decl):
            return False
        env = {v: o for (v, _), o in zip(decl.params, args)}
        atom = GroundAtom(decl.name, tuple(args))
        return self.eval(decl.body, env, atom)

    def eval(self, expr: Expr, env: Env, atom: GroundAtom) -> bool:
        if isinstance(expr, Compare):
            return _compare(expr.op, self.num(expr.lhs, env),
                            self.num(expr.rhs, env), self.eps)
        if isinstance(expr, OracleAssert):
            from predinv.perceiver import AssertionQuery
            args = tuple(env[v] for v in expr.vars)
            q = AssertionQuery(expr.template, args, frozenset(args))
            return self.perceiver.evaluate_assertion(q, self.state, self.ctx,
                                                     atom=atom)
        if isinstance(expr, And):
            return all(self.eval(x, env, atom) for x in expr.items)
        if isinstance(expr, Or):
            return any(self.eval(x, env, atom) for x in expr.items)
        if isinstance(expr, Not):
            return not self.eval(expr.item, env, atom)
        if isinstance(expr, Exists):
            return any(self.eval(expr.body, {**env, expr.var: o}, atom)
                       for o in self.objects_of(expr.type))
        if isinstance(expr, Forall):
            return all(self.eval(expr.body, {**env, expr.var: o}, atom)
                       for o in self.objects_of(expr.type))
        if isinstance(expr, Same):
            return env[expr.a] == env[expr.b]
        if isinstance(expr, Truth):
            return expr.value
        raise TypeError(f"cannot evaluate {expr!r} on a feature state")


def eval_primitive(decl: PredicateDecl, args: Sequence[ObjectRef],
                   state: FeatureState, perceiver, ctx=None,
                   eps: float = EQ_EPSILON) -> bool:
    """Truth of a primitive predicate on a low-level state.

    Wrong arity or argument types evaluate to False.
    """
    if decl.is_derived:
        raise DSLError(f"{decl.name} is derived; evaluate it on atoms")
    return PrimitiveEvaluator(state, perceiver, ctx, eps).holds(decl, args)


def compile_derived(decl: PredicateDecl
                    ) -> Callable[[Env, AtomIndex, Mapping[str, Tuple[
                        ObjectRef, ...]]], bool]:
    """Compile a derived body into ``f(env, index, objects_by_type)``."""

    def comp(expr: Expr) -> Callable:
        if isinstance(expr, Holds):
            pred, vs = expr.pred, expr.vars
            return lambda env, idx, dom: tuple(env[v] for v in vs) in \
                idx.get(pred, ())
        if isinstance(expr, And):
            fs = [comp(x) for x in expr.items]
            return lambda env, idx, dom: all(f(env, idx, dom) for f in fs)
        if isinstance(expr, Or):
            fs = [comp(x) for x in expr.items]
            return lambda env, idx, dom: any(f(env, idx, dom) for f in fs)
        if isinstance(expr, Not):
            f = comp(expr.item)
            return lambda env, idx, dom: not f(env, idx, dom)
        if isinstance(expr, (Exists, Forall)):
            f = comp(expr.body)
            var, tname = expr.var, expr.type
            quant = any if isinstance(expr, Exists) else all

            def q(env, idx, dom):
                inner = dict(env)
                for o in dom.get(tname, ()):
                    inner[var] = o
                    r = f(inner, idx, dom)
                    if quant is any and r:
                        return True
                    if quant is all and not r:
                        return False
                return quant is all
            return q
        if isinstance(expr, CountEq):
            left, right = expr.left, expr.right
            return lambda env, idx, dom: _count(left, env, idx) == \
                _count(right, env, idx)
        if isinstance(expr, Same):
            a, b = expr.a, expr.b
            return lambda env, idx, dom: env[a] == env[b]
        if isinstance(expr, Truth):
            val = expr.value
            return lambda env, idx, dom: val
        raise TypeError(f"cannot evaluate {expr!r} on atoms")

    return comp(decl.body)


def _count(spec: CountSpec, env: Env, idx: AtomIndex) -> int:
    fixed = [(i, env[a]) for i, a in enumerate(spec.args) if a is not None]
    return sum(1 for tup in idx.get(spec.pred, ())
               if all(tup[i] == o for i, o in fixed))


def load_predicate_file(path) -> List[PredicateDecl]:
    with open(path, encoding="utf-8") as f:
        return parse(f.read())
