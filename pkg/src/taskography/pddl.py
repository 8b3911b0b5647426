"""Typed STRIPS PDDL: emit domains and problems, and parse them back.

The dialect is ``:strips :typing :negative-preconditions``.  Symbols are
case-sensitive here so that they round-trip unchanged.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Union

from .domain import (
    Atom,
    DomainSpec,
    Family,
    OperatorSchema,
    PredicateSchema,
    ProblemInstance,
)

SUPPORTED_REQUIREMENTS = (":strips", ":typing", ":negative-preconditions")


class PddlError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line, self.column = line, column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


@dataclass(frozen=True)
class Token:
    text: str
    line: int
    column: int


@dataclass
class SExpr:
    items: list["Expr"]
    line: int
    column: int


Expr = Union[Token, SExpr]


# ---------------------------------------------------------------------------
# Emission


def _lit(lit: Atom) -> str:
    return "(" + " ".join(lit) + ")"


def _conj(pos: Iterable[Atom], neg: Iterable[Atom] = ()) -> str:
    parts = [_lit(l) for l in pos] + [f"(not {_lit(l)})" for l in neg]
    if len(parts) == 1:
        return parts[0]
    return "(and " + " ".join(parts) + ")"


def _typed(params: Iterable[tuple[str, str]]) -> str:
    return " ".join(f"{v} - {t}" for v, t in params)


def emit_domain(spec: DomainSpec) -> str:
    out = [f"(define (domain {spec.name})"]
    out.append("  (:requirements " + " ".join(SUPPORTED_REQUIREMENTS) + ")")
    out.append("  (:types " + " ".join(spec.object_types) + " - object)")
    out.append("  (:predicates")
    for p in spec.predicates:
        out.append(f"    ({p.name} {_typed(p.params)})")
    out.append("  )")
    for op in spec.operators:
        out.append(f"  (:action {op.name}")
        out.append(f"    :parameters ({_typed(op.params)})")
        out.append(f"    :precondition {_conj(op.pre, op.pre_neg)}")
        out.append(f"    :effect {_conj(op.add, op.delete)}")
        out.append("  )")
    out.append(")")
    return "\n".join(out) + "\n"


def emit_problem(inst: ProblemInstance) -> str:
    out = [f"(define (problem {inst.name})", f"  (:domain {inst.domain.name})", "  (:objects"]
    by_type: dict[str, list[str]] = {}
    for o, t in sorted(inst.objects, key=lambda ot: (ot[1], ot[0])):
        by_type.setdefault(t, []).append(o)
    for t, objs in by_type.items():
        out.append("    " + " ".join(objs) + f" - {t}")
    out.append("  )")
    out.append("  (:init")
    for lit in sorted(inst.init):
        out.append("    " + _lit(lit))
    out.append("  )")
    goal = _conj(inst.goal) if inst.goal else "(and)"
    out.append(f"  (:goal {goal})")
    out.append(")")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Lexing and s-expressions


_TOKEN = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s();]+")


def tokenize(text: str) -> list[Token]:
    tokens, line, col, pos = [], 1, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:  # pragma: no cover - the pattern matches any character
            raise PddlError(f"unexpected character {text[pos]!r}", line, col)
        s = m.group()
        if not s.isspace() and not s.startswith(";"):
            tokens.append(Token(s, line, col))
        nl = s.count("\n")
        if nl:
            line += nl
            col = len(s) - s.rfind("\n")
        else:
            col += len(s)
        pos = m.end()
    return tokens


def parse_sexpr(text: str) -> SExpr:
    tokens = tokenize(text)
    if not tokens:
        raise PddlError("empty input", 1, 1)
    stack: list[SExpr] = []
    root: SExpr | None = None
    # an open list that a later line dedents past is the likely unclosed one
    suspect: SExpr | None = None
    prev_line = 0
    for tok in tokens:
        starts_line = tok.line != prev_line
        prev_line = tok.line
        if tok.text == "(":
            if (suspect is None and starts_line and stack and stack[-1].line < tok.line
                    and tok.column <= stack[-1].column):
                suspect = stack[-1]
            node = SExpr([], tok.line, tok.column)
            if stack:
                stack[-1].items.append(node)
            elif root is not None:
                raise PddlError("content after the top-level expression", tok.line, tok.column)
            else:
                root = node
            stack.append(node)
        elif tok.text == ")":
            if not stack:
                raise PddlError("unbalanced ')'", tok.line, tok.column)
            closed = stack.pop()
            if suspect is None and starts_line and closed.line < tok.line and tok.column < closed.column:
                suspect = closed
        else:
            if not stack:
                raise PddlError(f"symbol {tok.text!r} outside any expression", tok.line, tok.column)
            stack[-1].items.append(tok)
    if stack:
        open_ = suspect if suspect is not None else stack[-1]
        raise PddlError("unbalanced '(': expression never closed", open_.line, open_.column)
    return root


def _expect_list(e: Expr, what: str) -> SExpr:
    if not isinstance(e, SExpr):
        raise PddlError(f"expected {what}, got {e.text!r}", e.line, e.column)
    return e


def _sym(e: Expr, what: str) -> str:
    if not isinstance(e, Token):
        raise PddlError(f"expected {what}, got a list", e.line, e.column)
    return e.text


def _header(root: SExpr, kind: str) -> tuple[str, list[Expr]]:
    items = root.items
    if len(items) < 2 or not isinstance(items[0], Token) or items[0].text != "define":
        raise PddlError("expected (define ...)", root.line, root.column)
    head = _expect_list(items[1], f"({kind} <name>)")
    if len(head.items) != 2 or _sym(head.items[0], kind) != kind:
        raise PddlError(f"expected ({kind} <name>)", head.line, head.column)
    return _sym(head.items[1], "name"), items[2:]


def _typed_list(items: list[Expr]) -> list[tuple[str, str]]:
    out, pending = [], []
    i = 0
    while i < len(items):
        s = _sym(items[i], "symbol")
        if s == "-":
            if i + 1 >= len(items) or not pending:
                raise PddlError("dangling '-' in typed list", items[i].line, items[i].column)
            t = _sym(items[i + 1], "type")
            out += [(p, t) for p in pending]
            pending = []
            i += 2
        else:
            pending.append(s)
            i += 1
    if pending:
        raise PddlError(f"untyped symbols {pending}", items[-1].line, items[-1].column)
    return out


def _literal(e: Expr) -> tuple[Atom, bool]:
    lst = _expect_list(e, "literal")
    if not lst.items:
        raise PddlError("empty literal", lst.line, lst.column)
    head = _sym(lst.items[0], "predicate")
    if head == "not":
        if len(lst.items) != 2:
            raise PddlError("(not ...) takes one literal", lst.line, lst.column)
        atom, positive = _literal(lst.items[1])
        if not positive:
            raise PddlError("nested negation", lst.line, lst.column)
        return atom, False
    if head in ("and", "or", "forall", "exists", "when", "imply"):
        raise PddlError(f"unexpected connective {head!r}", lst.line, lst.column)
    return (head, *(_sym(x, "argument") for x in lst.items[1:])), True


def _conjunction(e: Expr) -> tuple[list[Atom], list[Atom], list[SExpr]]:
    lst = _expect_list(e, "condition")
    parts = [lst]
    if lst.items and isinstance(lst.items[0], Token) and lst.items[0].text == "and":
        parts = [_expect_list(x, "literal") for x in lst.items[1:]]
    pos, neg, where = [], [], []
    for p in parts:
        atom, positive = _literal(p)
        (pos if positive else neg).append(atom)
        where.append(p)
    return pos, neg, where


def _check_requirements(section: SExpr) -> None:
    for tok in section.items[1:]:
        req = _sym(tok, "requirement")
        if req not in SUPPORTED_REQUIREMENTS:
            raise PddlError(f"unsupported requirement {req}", tok.line, tok.column)


_DOMAIN_NAME = re.compile(r"^(?P<family>(?:lifted-)?(?:rearrangement|courier))(?:-n(?P<n>\d+))?-k(?P<k>\d+)$")


def _family_of(name: str, where: Expr) -> tuple[Family, int, int | None]:
    m = _DOMAIN_NAME.match(name)
    if m is None:
        raise PddlError(f"domain name {name!r} does not encode a known family", where.line, where.column)
    family = Family(m["family"])
    n = int(m["n"]) if m["n"] else None
    if family.courier != (n is not None):
        raise PddlError(f"domain name {name!r}: capacity suffix mismatch", where.line, where.column)
    return family, int(m["k"]), n


def parse_domain(text: str) -> DomainSpec:
    root = parse_sexpr(text)
    name, sections = _header(root, "domain")
    family, k, n = _family_of(name, root.items[1])
    types: list[str] = []
    predicates: list[PredicateSchema] = []
    operators: list[OperatorSchema] = []
    for sec in sections:
        sec = _expect_list(sec, "domain section")
        key = _sym(sec.items[0], "section keyword") if sec.items else ""
        if key == ":requirements":
            _check_requirements(sec)
        elif key == ":types":
            items = sec.items[1:]
            for sym in items:
                s = _sym(sym, "type")
                if s == "-":
                    break
                types.append(s)
        elif key == ":predicates":
            for p in sec.items[1:]:
                p = _expect_list(p, "predicate declaration")
                pname = _sym(p.items[0], "predicate name")
                predicates.append(PredicateSchema(pname, tuple(_typed_list(p.items[1:]))))
        elif key == ":action":
            operators.append(_parse_action(sec, set(types), {p.name: p for p in predicates}))
        else:
            raise PddlError(f"unsupported domain section {key!r}", sec.line, sec.column)
    return DomainSpec(family, k, n, tuple(types), tuple(predicates), tuple(operators))


def _parse_action(sec: SExpr, types: set[str], preds: dict[str, PredicateSchema]) -> OperatorSchema:
    items = sec.items
    name = _sym(items[1], "action name")
    fields: dict[str, Expr] = {}
    i = 2
    while i < len(items):
        key = _sym(items[i], "action keyword")
        if i + 1 >= len(items):
            raise PddlError(f"{key} without value", items[i].line, items[i].column)
        fields[key] = items[i + 1]
        i += 2
    params = tuple(_typed_list(_expect_list(fields.get(":parameters", SExpr([], sec.line, sec.column)),
                                            "parameter list").items))
    for v, t in params:
        if t not in types:
            raise PddlError(f"{name}: unknown type {t!r}", sec.line, sec.column)
    pre, pre_neg, w1 = _conjunction(fields[":precondition"]) if ":precondition" in fields else ([], [], [])
    add, delete, w2 = _conjunction(fields[":effect"]) if ":effect" in fields else ([], [], [])
    for lit, where in zip([*pre, *pre_neg, *add, *delete], [*w1, *w2]):
        _check_atom(lit, preds, where)
    try:
        return OperatorSchema(name, params, tuple(pre), tuple(pre_neg), tuple(add), tuple(delete))
    except ValueError as exc:
        raise PddlError(str(exc), sec.line, sec.column) from None


def _check_atom(lit: Atom, preds: dict[str, PredicateSchema], where: Expr,
                objects: dict[str, str] | None = None) -> None:
    schema = preds.get(lit[0])
    if schema is None:
        raise PddlError(f"unknown predicate {lit[0]!r}", where.line, where.column)
    if schema.arity != len(lit) - 1:
        raise PddlError(f"{lit[0]} takes {schema.arity} arguments, got {len(lit) - 1}", where.line, where.column)
    if objects is not None:
        for arg, t in zip(lit[1:], schema.types):
            if arg not in objects:
                raise PddlError(f"unknown object {arg!r}", where.line, where.column)
            if objects[arg] != t:
                raise PddlError(f"{arg} has type {objects[arg]}, {lit[0]} needs {t}", where.line, where.column)


def parse_problem(text: str, domain: DomainSpec) -> ProblemInstance:
    root = parse_sexpr(text)
    name, sections = _header(root, "problem")
    preds = {p.name: p for p in domain.predicates}
    objects: list[tuple[str, str]] = []
    init: list[Atom] = []
    goal: list[Atom] = []
    seen_goal = False
    for sec in sections:
        sec = _expect_list(sec, "problem section")
        key = _sym(sec.items[0], "section keyword") if sec.items else ""
        if key == ":domain":
            dname = _sym(sec.items[1], "domain name")
            if dname != domain.name:
                raise PddlError(f"problem is for domain {dname!r}, not {domain.name!r}", sec.line, sec.column)
        elif key == ":requirements":
            _check_requirements(sec)
        elif key == ":objects":
            objects = _typed_list(sec.items[1:])
            for o, t in objects:
                if t not in domain.object_types:
                    raise PddlError(f"object {o!r} has unknown type {t!r}", sec.line, sec.column)
        elif key == ":init":
            table = dict(objects)
            for e in sec.items[1:]:
                atom, positive = _literal(e)
                if not positive:
                    raise PddlError("negative literal in :init", e.line, e.column)
                _check_atom(atom, preds, e, table)
                init.append(atom)
        elif key == ":goal":
            seen_goal = True
            pos, neg, where = _conjunction(sec.items[1])
            if neg:
                raise PddlError("negative goals are not supported", sec.line, sec.column)
            for atom, w in zip(pos, where):
                _check_atom(atom, preds, w, dict(objects))
            goal = pos
        else:
            raise PddlError(f"unsupported problem section {key!r}", sec.line, sec.column)
    if not seen_goal:
        raise PddlError("problem has no :goal", root.line, root.column)
    objects.sort(key=lambda ot: (ot[1], ot[0]))
    return ProblemInstance(name, domain, tuple(objects), frozenset(init), tuple(goal))
