"""Declarative transformation rules: parse, typecheck, execute, trace.

One rule maps one domain type to one view concept. Bindings are attribute
reads, literals, or single-hop reads across a path expression; guards are
conjunctions of attribute comparisons and role tests. Execution produces
canonically ordered content plus a trace map back to the context nodes each
element came from.
"""

from __future__ import annotations

import datetime as dt
import json
import operator
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Union

from .content import Element, ViewContent
from .graph import ContextGraph, Direction, PathExpression, PathStep, walk
from .lexer import TokenStream
from .metamodel import (
    ACTIVITY_ARTIFACT_KINDS,
    DATE,
    DOCUMENT_OBJECT_KINDS,
    ID_ATTRIBUTE,
    INTEGER,
    PARTICIPATION_KINDS,
    STRING,
    DomainModel,
    Scalar,
    ScalarType,
    ValidationReport,
    Violation,
)
from .views import ViewConceptModel

COORDINATOR_ROLE = "coordinator"

_COMPARATORS = {
    "=": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}
_ORDERING_OPS = ("<", "<=", ">", ">=")


class GenerationError(Exception):
    """Content generation rejected (key collision or bad expression input)."""


@dataclass(frozen=True)
class AttrExpr:
    attr: str


@dataclass(frozen=True)
class LiteralExpr:
    value: Scalar
    form: str  # string | int | date | symbol


@dataclass(frozen=True)
class PathExpr:
    path: PathExpression
    attr: str


Expr = Union[AttrExpr, LiteralExpr, PathExpr]


@dataclass(frozen=True)
class AttrCondition:
    attr: str
    op: str
    literal: LiteralExpr


@dataclass(frozen=True)
class RoleCondition:
    op: str  # = | !=
    role: str


Condition = Union[AttrCondition, RoleCondition]


@dataclass(frozen=True)
class Binding:
    target_field: str
    expr: Expr
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Rule:
    name: str
    source_type: str
    guard: tuple[Condition, ...]
    view_id: str
    concept: str
    bindings: tuple[Binding, ...]
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...] = ()

    def for_view(self, view_id: str) -> tuple[Rule, ...]:
        return tuple(r for r in self.rules if r.view_id == view_id)


# --------------------------------------------------------------------------
# Parsing


def parse_rules(text: str, filename: str | None = None) -> RuleSet:
    ts = TokenStream.from_text(text, filename, mode="dsl")
    rules: list[Rule] = []
    seen: set[str] = set()
    while not ts.at_end():
        ts.expect("ident", "rule")
        name_tok = ts.expect("ident", what="rule name")
        if name_tok.text in seen:
            ts.fail(f"duplicate rule name {name_tok.text!r}", name_tok)
        seen.add(name_tok.text)
        ts.expect("op", "{")
        ts.expect("ident", "from")
        source_tok = ts.expect("ident", what="source type")
        guard: tuple[Condition, ...] = ()
        if ts.accept("ident", "where"):
            guard = _parse_guard(ts)
        ts.expect("ident", "to")
        view_tok = ts.expect("ident", what="view id")
        ts.expect("op", ".")
        concept_tok = ts.expect("ident", what="concept name")
        ts.expect("op", "{")
        bindings: list[Binding] = []
        bound: set[str] = set()
        while not ts.check("op", "}"):
            field_tok = ts.expect("ident", what="target field")
            if field_tok.text in bound:
                ts.fail(f"duplicate binding for field {field_tok.text!r}", field_tok)
            bound.add(field_tok.text)
            ts.expect("op", ":=")
            expr = _parse_expr(ts)
            bindings.append(Binding(field_tok.text, expr, field_tok.line, field_tok.col))
            if not ts.accept("op", ","):
                break
        ts.expect("op", "}")
        ts.expect("op", "}")
        rules.append(
            Rule(
                name_tok.text,
                source_tok.text,
                guard,
                view_tok.text,
                concept_tok.text,
                tuple(bindings),
                name_tok.line,
                name_tok.col,
            )
        )
    return RuleSet(tuple(rules))


def _parse_expr(ts: TokenStream) -> Expr:
    if ts.check("string") or ts.check("int") or ts.check("date"):
        tok = ts.advance()
        form = {"string": "string", "int": "int", "date": "date"}[tok.kind]
        return LiteralExpr(tok.value, form)  # type: ignore[arg-type]
    tok = ts.expect("ident", what="expression")
    if tok.text == "src":
        ts.expect("op", ".")
        attr = ts.expect("ident", what="attribute name")
        return AttrExpr(attr.text)
    if tok.text == "first":
        ts.expect("op", "(")
        ts.expect("ident", "walk")
        ts.expect("op", "(")
        path = _parse_path(ts)
        ts.expect("op", ")")
        ts.expect("op", ")")
        ts.expect("op", ".")
        attr = ts.expect("ident", what="attribute name")
        return PathExpr(path, attr.text)
    return LiteralExpr(tok.text, "symbol")


def _parse_path(ts: TokenStream) -> PathExpression:
    steps = [_parse_step(ts)]
    while ts.accept("op", "/"):
        steps.append(_parse_step(ts))
    return PathExpression(tuple(steps))


def _parse_step(ts: TokenStream) -> PathStep:
    rel_tok = ts.expect("ident", what="relation name")
    direction = Direction.FORWARD
    if ts.accept("op", "."):
        dir_tok = ts.expect("ident", what="fwd or bwd")
        if dir_tok.text == "fwd":
            direction = Direction.FORWARD
        elif dir_tok.text == "bwd":
            direction = Direction.BACKWARD
        else:
            ts.fail(f"expected fwd or bwd, found {dir_tok.text!r}", dir_tok)
    return PathStep(rel_tok.text, direction)


def _parse_guard(ts: TokenStream) -> tuple[Condition, ...]:
    conditions = [_parse_condition(ts)]
    while ts.accept("ident", "and"):
        conditions.append(_parse_condition(ts))
    return tuple(conditions)


def _parse_condition(ts: TokenStream) -> Condition:
    head = ts.expect("ident", what="'src' or 'role'")
    if head.text == "src":
        ts.expect("op", ".")
        attr = ts.expect("ident", what="attribute name")
        op_tok = ts.current
        for op in _COMPARATORS:
            if ts.accept("op", op):
                literal = _parse_literal(ts)
                return AttrCondition(attr.text, op, literal)
        ts.fail(f"expected comparison operator, found {op_tok.text!r}", op_tok)
    if head.text == "role":
        if ts.accept("op", "="):
            op = "="
        elif ts.accept("op", "!="):
            op = "!="
        else:
            ts.fail("expected '=' or '!=' after 'role'")
            raise AssertionError("unreachable")
        role_tok = ts.expect("ident", what="role name")
        return RoleCondition(op, role_tok.text)
    ts.fail(f"guard must start with 'src' or 'role', found {head.text!r}", head)
    raise AssertionError("unreachable")


def _parse_literal(ts: TokenStream) -> LiteralExpr:
    if ts.check("string") or ts.check("int") or ts.check("date"):
        tok = ts.advance()
        form = {"string": "string", "int": "int", "date": "date"}[tok.kind]
        return LiteralExpr(tok.value, form)  # type: ignore[arg-type]
    tok = ts.expect("ident", what="literal")
    return LiteralExpr(tok.text, "symbol")


# --------------------------------------------------------------------------
# Printing (canonical; parse of the output equals the input structure)


def print_rules(rs: RuleSet) -> str:
    blocks = [_print_rule(rule) for rule in rs.rules]
    return "\n".join(blocks)


def _print_rule(rule: Rule) -> str:
    lines = [f"rule {rule.name} {{"]
    from_line = f"  from {rule.source_type}"
    if rule.guard:
        from_line += " where " + " and ".join(_print_condition(c) for c in rule.guard)
    lines.append(from_line)
    lines.append(f"  to {rule.view_id}.{rule.concept} {{")
    for i, binding in enumerate(rule.bindings):
        comma = "," if i + 1 < len(rule.bindings) else ""
        lines.append(f"    {binding.target_field} := {_print_expr(binding.expr)}{comma}")
    lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _print_condition(c: Condition) -> str:
    if isinstance(c, RoleCondition):
        return f"role {c.op} {c.role}"
    return f"src.{c.attr} {c.op} {_print_literal(c.literal)}"


def _print_expr(expr: Expr) -> str:
    if isinstance(expr, AttrExpr):
        return f"src.{expr.attr}"
    if isinstance(expr, LiteralExpr):
        return _print_literal(expr)
    steps = " / ".join(_print_step(s) for s in expr.path.steps)
    return f"first(walk({steps})).{expr.attr}"


def _print_step(step: PathStep) -> str:
    suffix = "fwd" if step.direction is Direction.FORWARD else "bwd"
    return f"{step.relation}.{suffix}"


def _print_literal(lit: LiteralExpr) -> str:
    if lit.form == "string":
        return json.dumps(lit.value, ensure_ascii=False)
    if lit.form == "date":
        return lit.value.isoformat()  # type: ignore[union-attr]
    return str(lit.value)


# --------------------------------------------------------------------------
# Static checking


def check_rules(
    rs: RuleSet, dm: DomainModel, views: tuple[ViewConceptModel, ...]
) -> ValidationReport:
    """Static safety: empty report iff every rule is well-typed."""
    by_view = {v.view_id: v for v in views}
    out: list[Violation] = []
    for rule in rs.rules:
        source = dm.type_named(rule.source_type)
        if source is None:
            out.append(
                Violation("unknown_source_type", rule.name, f"unknown source type {rule.source_type!r}")
            )
        view = by_view.get(rule.view_id)
        if view is None:
            out.append(Violation("unknown_view", rule.name, f"unknown view {rule.view_id!r}"))
            continue
        concept = view.concept(rule.concept)
        if concept is None:
            out.append(
                Violation(
                    "unknown_concept",
                    rule.name,
                    f"view {rule.view_id!r} has no concept {rule.concept!r}",
                )
            )
            continue
        declared = {f.name: f for f in concept.fields}
        bound: set[str] = set()
        for binding in rule.bindings:
            bound.add(binding.target_field)
            target = declared.get(binding.target_field)
            if target is None:
                out.append(
                    Violation(
                        "unknown_field",
                        rule.name,
                        f"concept {concept.name!r} has no field {binding.target_field!r}",
                    )
                )
                continue
            if source is not None:
                _check_expr(rule, binding, target.type, source, dm, out)
        for name in declared:
            if name not in bound:
                out.append(
                    Violation("unbound_field", rule.name, f"target field {name!r} is never bound")
                )
        if source is not None:
            for condition in rule.guard:
                _check_condition(rule, condition, source, dm, out)
    return ValidationReport.build(out)


def _expr_type(rule: Rule, expr: Expr, source, dm: DomainModel, out: list[Violation]):
    """Resolve an expression's scalar type; None when already reported."""
    if isinstance(expr, AttrExpr):
        if expr.attr == ID_ATTRIBUTE:
            return STRING
        decl = source.attribute(expr.attr)
        if decl is None:
            out.append(
                Violation(
                    "unknown_attribute",
                    rule.name,
                    f"type {source.name!r} has no attribute {expr.attr!r}",
                )
            )
            return None
        return decl.type
    if isinstance(expr, LiteralExpr):
        return {"string": STRING, "int": INTEGER, "date": DATE}.get(expr.form)
    current = source.name
    for i, step in enumerate(expr.path.steps):
        rel = dm.relation_named(step.relation)
        if rel is None:
            out.append(
                Violation(
                    "unknown_relation",
                    rule.name,
                    f"path step {i + 1}: unknown relation {step.relation!r}",
                )
            )
            return None
        expected = rel.source_type if step.direction is Direction.FORWARD else rel.target_type
        if expected != current:
            out.append(
                Violation(
                    "path_type",
                    rule.name,
                    f"path step {i + 1}: relation {step.relation!r} does not apply to {current!r}",
                )
            )
            return None
        current = rel.target_type if step.direction is Direction.FORWARD else rel.source_type
    end_type = dm.type_named(current)
    assert end_type is not None
    if expr.attr == ID_ATTRIBUTE:
        return STRING
    decl = end_type.attribute(expr.attr)
    if decl is None:
        out.append(
            Violation(
                "unknown_attribute",
                rule.name,
                f"type {end_type.name!r} has no attribute {expr.attr!r}",
            )
        )
        return None
    return decl.type


def _check_expr(
    rule: Rule,
    binding: Binding,
    target: ScalarType,
    source,
    dm: DomainModel,
    out: list[Violation],
) -> None:
    expr = binding.expr
    if isinstance(expr, LiteralExpr) and expr.form == "symbol":
        if target.kind != "enum" or expr.value not in target.values:
            out.append(
                Violation(
                    "kind_mismatch",
                    rule.name,
                    f"field {binding.target_field!r}: {expr.value!r} is not a member of {target}",
                )
            )
        return
    expr_type = _expr_type(rule, expr, source, dm, out)
    if expr_type is None:
        return
    if target.kind == "enum":
        ok = expr_type.kind == "enum" and set(expr_type.values) <= set(target.values)
    else:
        ok = expr_type.kind == target.kind
    if not ok:
        out.append(
            Violation(
                "kind_mismatch",
                rule.name,
                f"field {binding.target_field!r} expects {target}, expression yields {expr_type}",
            )
        )


def _check_condition(rule, condition: Condition, source, dm: DomainModel, out: list[Violation]) -> None:
    if isinstance(condition, RoleCondition):
        return
    attr_type = _expr_type(rule, AttrExpr(condition.attr), source, dm, out)
    if attr_type is None:
        return
    lit = condition.literal
    if lit.form == "symbol":
        if attr_type.kind != "enum" or lit.value not in attr_type.values:
            out.append(
                Violation(
                    "kind_mismatch",
                    rule.name,
                    f"guard on {condition.attr!r}: {lit.value!r} is not a member of {attr_type}",
                )
            )
            return
    else:
        lit_kind = {"string": "string", "int": "integer", "date": "date"}[lit.form]
        if attr_type.kind != lit_kind:
            out.append(
                Violation(
                    "kind_mismatch",
                    rule.name,
                    f"guard on {condition.attr!r} compares {attr_type} with a {lit_kind}",
                )
            )
            return
    if condition.op in _ORDERING_OPS and attr_type.kind not in ("integer", "date"):
        out.append(
            Violation(
                "kind_mismatch",
                rule.name,
                f"guard on {condition.attr!r}: ordering comparison needs integer or date",
            )
        )


# --------------------------------------------------------------------------
# Role filters


@dataclass(frozen=True)
class RoleFilter:
    """Keeps elements whose trace intersects the role's visible node set."""

    role: str
    keep_all: bool = False
    actor_types: tuple[str, ...] = ()
    role_attribute: str = "role"
    visibility_paths: tuple[PathExpression, ...] = ()

    def visible_nodes(self, g: ContextGraph) -> frozenset[str]:
        seeds = frozenset(
            node_id
            for node_id, node in g.nodes.items()
            if node.domain_type in self.actor_types
            and node.attributes.get(self.role_attribute) == self.role
        )
        visible = set(seeds)
        for path in self.visibility_paths:
            visible.update(walk(g, seeds, path))
        return frozenset(visible)


def coordinator_filter() -> RoleFilter:
    return RoleFilter(COORDINATOR_ROLE, keep_all=True)


def standard_role_filter(dm: DomainModel, role: str) -> RoleFilter:
    """Visibility derived from the model's meta kinds.

    A role sees: its actors, the activities they take part in, co-participants
    of those activities, the artifacts those activities act on, and the
    documents referring to those artifacts.
    """
    if role == COORDINATOR_ROLE:
        return coordinator_filter()
    actor_types = tuple(
        t.name
        for t in dm.types
        if t.meta_kind.name == "Actor" and t.attribute("role") is not None
    )
    participation = [r.name for r in dm.relations if r.meta_relation.name in PARTICIPATION_KINDS]
    activity_artifact = [
        r.name for r in dm.relations if r.meta_relation.name in ACTIVITY_ARTIFACT_KINDS
    ]
    document_object = [r.name for r in dm.relations if r.meta_relation.name in DOCUMENT_OBJECT_KINDS]
    paths: list[PathExpression] = []
    for a in participation:
        fwd = PathStep(a, Direction.FORWARD)
        paths.append(PathExpression((fwd,)))
        for b in participation:
            paths.append(PathExpression((fwd, PathStep(b, Direction.BACKWARD))))
        for s in activity_artifact:
            s_fwd = PathStep(s, Direction.FORWARD)
            paths.append(PathExpression((fwd, s_fwd)))
            for d in document_object:
                paths.append(PathExpression((fwd, s_fwd, PathStep(d, Direction.BACKWARD))))
    return RoleFilter(role, actor_types=actor_types, visibility_paths=tuple(paths))


# --------------------------------------------------------------------------
# Execution


@dataclass(frozen=True)
class TraceMap:
    view_id: str
    graph_version: int
    entries: Mapping[str, frozenset[str]]

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))


def generate(
    rs: RuleSet, g: ContextGraph, view: ViewConceptModel, role_filter: RoleFilter
) -> tuple[ViewContent, TraceMap]:
    """Run every rule targeting the view; returns filtered, ordered content.

    Element keys are unique across the whole view; a collision aborts the
    generation naming both source nodes.
    """
    concepts = {c.name: c for c in view.concepts}
    elements: dict[str, Element] = {}
    traces: dict[str, frozenset[str]] = {}
    origins: dict[str, str] = {}
    for rule in rs.for_view(view.view_id):
        concept = concepts.get(rule.concept)
        if concept is None:
            raise GenerationError(
                f"rule {rule.name!r}: view {view.view_id!r} has no concept {rule.concept!r}"
            )
        for node_id in sorted(g.nodes):
            node = g.nodes[node_id]
            if node.domain_type != rule.source_type:
                continue
            if not _guard_passes(rule, node_id, node, role_filter.role):
                continue
            fields: dict[str, Scalar] = {}
            trace: set[str] = {node_id}
            for binding in rule.bindings:
                value, referenced = _evaluate(rule, binding.expr, g, node_id, node)
                fields[binding.target_field] = value
                trace.update(referenced)
            key = fields.get(concept.key_field)
            if not isinstance(key, str):
                raise GenerationError(
                    f"rule {rule.name!r} on node {node_id!r}: key field "
                    f"{concept.key_field!r} must be a string"
                )
            if key in elements:
                raise GenerationError(
                    f"key collision on {key!r} in view {view.view_id!r}: "
                    f"nodes {origins[key]!r} and {node_id!r}"
                )
            elements[key] = Element(concept.name, key, fields)
            traces[key] = frozenset(trace)
            origins[key] = node_id

    if not role_filter.keep_all:
        visible = role_filter.visible_nodes(g)
        kept = {key for key in elements if traces[key] & visible}
        elements = {k: v for k, v in elements.items() if k in kept}
        traces = {k: v for k, v in traces.items() if k in kept}

    ordered = tuple(sorted(elements.values(), key=lambda e: (e.concept, e.key)))
    return (
        ViewContent(view.view_id, g.version, ordered),
        TraceMap(view.view_id, g.version, traces),
    )


def _evaluate(
    rule: Rule, expr: Expr, g: ContextGraph, node_id: str, node
) -> tuple[Scalar, frozenset[str]]:
    if isinstance(expr, AttrExpr):
        return _read_attr(rule, expr.attr, node_id, node), frozenset()
    if isinstance(expr, LiteralExpr):
        return expr.value, frozenset()
    targets = walk(g, (node_id,), expr.path)
    if not targets:
        raise GenerationError(
            f"rule {rule.name!r} on node {node_id!r}: path expression matched nothing"
        )
    chosen = min(targets)
    value = _read_attr(rule, expr.attr, chosen, g.nodes[chosen])
    return value, frozenset({chosen})


def _read_attr(rule: Rule, attr: str, node_id: str, node) -> Scalar:
    if attr == ID_ATTRIBUTE:
        return node_id
    if attr not in node.attributes:
        raise GenerationError(
            f"rule {rule.name!r} on node {node_id!r}: missing attribute {attr!r}"
        )
    return node.attributes[attr]


def _guard_passes(rule: Rule, node_id: str, node, role: str) -> bool:
    for condition in rule.guard:
        if isinstance(condition, RoleCondition):
            match = role == condition.role
            if (condition.op == "=") != match:
                return False
            continue
        value = _read_attr(rule, condition.attr, node_id, node)
        literal = condition.literal.value
        try:
            ok = _COMPARATORS[condition.op](value, literal)
        except TypeError as exc:
            raise GenerationError(
                f"rule {rule.name!r} on node {node_id!r}: bad guard comparison ({exc})"
            ) from None
        if not ok:
            return False
    return True
