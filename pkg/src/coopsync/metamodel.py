"""Cooperation metamodel, user-declared domain models, and conformance checks.

Three modelling levels: the metamodel is fixed (actors, activities, artifacts
and a closed vocabulary of relation kinds between them); a domain model
declares concrete types and relations against it; a context graph instantiates
a domain model and is validated by :func:`validate_graph`.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Union

from .lexer import ParseError, Token, TokenStream

if TYPE_CHECKING:
    from .graph import ContextGraph

Scalar = Union[str, int, dt.date]

ACTOR_KIND = "Actor"
ACTIVITY_KIND = "Activity"
ARTIFACT_KIND = "Artifact"
DOCUMENT_SUBKIND = "Document"
OBJECT_SUBKIND = "Object"

_ROOT_KINDS = (ACTOR_KIND, ACTIVITY_KIND, ARTIFACT_KIND)

#: Attribute name reserved for the node id in rule expressions.
ID_ATTRIBUTE = "id"


@dataclass(frozen=True)
class MetaEntityKind:
    """One of the three root entity kinds, optionally narrowed for artifacts."""

    name: str
    artifact_subkind: str | None = None

    def __post_init__(self) -> None:
        if self.name not in _ROOT_KINDS:
            raise ValueError(f"unknown entity kind {self.name!r}")
        if self.artifact_subkind is not None:
            if self.name != ARTIFACT_KIND:
                raise ValueError("only Artifact kinds carry a subkind")
            if self.artifact_subkind not in (DOCUMENT_SUBKIND, OBJECT_SUBKIND):
                raise ValueError(f"unknown artifact subkind {self.artifact_subkind!r}")

    def accepts(self, other: "MetaEntityKind") -> bool:
        """Whether a value of kind ``other`` fits where ``self`` is required."""
        if self.name != other.name:
            return False
        if self.artifact_subkind is None:
            return True
        return self.artifact_subkind == other.artifact_subkind

    def __str__(self) -> str:
        if self.artifact_subkind:
            return f"{self.name}.{self.artifact_subkind}"
        return self.name


ACTOR = MetaEntityKind(ACTOR_KIND)
ACTIVITY = MetaEntityKind(ACTIVITY_KIND)
ARTIFACT = MetaEntityKind(ARTIFACT_KIND)
DOCUMENT = MetaEntityKind(ARTIFACT_KIND, DOCUMENT_SUBKIND)
OBJECT = MetaEntityKind(ARTIFACT_KIND, OBJECT_SUBKIND)


@dataclass(frozen=True)
class MetaRelationKind:
    name: str
    source_kind: MetaEntityKind
    target_kind: MetaEntityKind
    variability_tag: str


@dataclass(frozen=True)
class Metamodel:
    entity_kinds: tuple[MetaEntityKind, ...]
    relation_kinds: tuple[MetaRelationKind, ...]

    def relation_kind(self, name: str) -> MetaRelationKind | None:
        for kind in self.relation_kinds:
            if kind.name == name:
                return kind
        return None


_BUILTIN = Metamodel(
    entity_kinds=(ACTOR, ACTIVITY, ARTIFACT),
    relation_kinds=(
        MetaRelationKind("hierarchy", ACTOR, ACTOR, "hierarchy"),
        MetaRelationKind("mutual_adjustment", ACTOR, ACTOR, "mutual adjustment"),
        MetaRelationKind("depends_on", ACTIVITY, ACTIVITY, "interdependence"),
        MetaRelationKind("participates_in", ACTOR, ACTIVITY, "participation"),
        MetaRelationKind("responsible_for", ACTOR, ACTIVITY, "responsibility"),
        MetaRelationKind("manipulates", ACTOR, ARTIFACT, "manipulation"),
        MetaRelationKind("produces", ACTOR, ARTIFACT, "production"),
        MetaRelationKind("concerns", ACTIVITY, ARTIFACT, "concern"),
        MetaRelationKind("realizes", ACTIVITY, OBJECT, "realization"),
        MetaRelationKind("refers_to", DOCUMENT, OBJECT, "reference"),
    ),
)

#: Meta relation kinds linking actors to the activities they take part in.
PARTICIPATION_KINDS = frozenset({"participates_in", "responsible_for"})
#: Meta relation kinds linking activities to the artifacts they act on.
ACTIVITY_ARTIFACT_KINDS = frozenset({"concerns", "realizes"})
#: Meta relation kinds linking documents to built objects.
DOCUMENT_OBJECT_KINDS = frozenset({"refers_to"})


def builtin_metamodel() -> Metamodel:
    """The fixed cooperation metamodel (level M2)."""
    return _BUILTIN


# --------------------------------------------------------------------------
# Scalar attribute types

_SCALAR_KINDS = ("string", "integer", "date", "enum")


@dataclass(frozen=True)
class ScalarType:
    kind: str
    values: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in _SCALAR_KINDS:
            raise ValueError(f"unknown scalar kind {self.kind!r}")
        if self.kind == "enum" and not self.values:
            raise ValueError("enum type needs at least one value")
        if self.kind != "enum" and self.values:
            raise ValueError(f"{self.kind} type takes no values")

    def check(self, value: Scalar) -> bool:
        if self.kind == "string":
            return isinstance(value, str)
        if self.kind == "integer":
            return isinstance(value, int) and not isinstance(value, bool)
        if self.kind == "date":
            return isinstance(value, dt.date)
        return isinstance(value, str) and value in self.values

    def __str__(self) -> str:
        if self.kind == "enum":
            return "enum(" + ",".join(self.values) + ")"
        return self.kind


STRING = ScalarType("string")
INTEGER = ScalarType("integer")
DATE = ScalarType("date")


def enum_of(*values: str) -> ScalarType:
    return ScalarType("enum", tuple(values))


# --------------------------------------------------------------------------
# Domain models (level M1)


@dataclass(frozen=True)
class AttributeDecl:
    name: str
    type: ScalarType


@dataclass(frozen=True)
class DomainType:
    name: str
    meta_kind: MetaEntityKind
    attributes: tuple[AttributeDecl, ...]

    def attribute(self, name: str) -> AttributeDecl | None:
        for attr in self.attributes:
            if attr.name == name:
                return attr
        return None


@dataclass(frozen=True)
class DomainRelation:
    name: str
    meta_relation: MetaRelationKind
    source_type: str
    target_type: str
    cardinality: str = "many"  # "one" | "many"


@dataclass(frozen=True)
class DomainModel:
    name: str
    types: tuple[DomainType, ...]
    relations: tuple[DomainRelation, ...]

    def type_named(self, name: str) -> DomainType | None:
        for t in self.types:
            if t.name == name:
                return t
        return None

    def relation_named(self, name: str) -> DomainRelation | None:
        for r in self.relations:
            if r.name == name:
                return r
        return None

    def types_of_kind(self, kind: MetaEntityKind) -> tuple[DomainType, ...]:
        return tuple(t for t in self.types if kind.accepts(t.meta_kind))


# --------------------------------------------------------------------------
# .cdm parsing and printing

_META_KIND_NAMES = {
    "Actor": ACTOR,
    "Activity": ACTIVITY,
}


def parse_domain_model(text: str, name: str = "domain", filename: str | None = None) -> DomainModel:
    """Parse domain-model source; raises :class:`ParseError` with position."""
    ts = TokenStream.from_text(text, filename, mode="dsl")
    mm = builtin_metamodel()
    types: list[DomainType] = []
    relations: list[DomainRelation] = []
    type_tokens: dict[str, Token] = {}
    relation_tokens: dict[str, Token] = {}

    while not ts.at_end():
        if ts.check("ident", "type"):
            ts.advance()
            types.append(_parse_type_decl(ts, type_tokens))
        elif ts.check("ident", "relation"):
            ts.advance()
            relations.append(_parse_relation_decl(ts, mm, relation_tokens, type_tokens, types))
        else:
            ts.fail(f"expected 'type' or 'relation', found {ts.current.text!r}")

    return DomainModel(name, tuple(types), tuple(relations))


def _parse_type_decl(ts: TokenStream, seen: dict[str, Token]) -> DomainType:
    name_tok = ts.expect("ident", what="type name")
    if name_tok.text in seen:
        ts.fail(f"duplicate type name {name_tok.text!r}", name_tok)
    seen[name_tok.text] = name_tok
    ts.expect("op", ":")
    kind = _parse_meta_kind(ts)
    ts.expect("op", "{")
    attrs: list[AttributeDecl] = []
    attr_names: set[str] = set()
    while not ts.check("op", "}"):
        attr_tok = ts.expect("ident", what="attribute name")
        if attr_tok.text == ID_ATTRIBUTE:
            ts.fail(f"attribute name {ID_ATTRIBUTE!r} is reserved for the node id", attr_tok)
        if attr_tok.text in attr_names:
            ts.fail(f"duplicate attribute {attr_tok.text!r}", attr_tok)
        attr_names.add(attr_tok.text)
        ts.expect("op", ":")
        attrs.append(AttributeDecl(attr_tok.text, parse_scalar_type(ts)))
        ts.accept("op", ",")
    ts.expect("op", "}")
    return DomainType(name_tok.text, kind, tuple(attrs))


def _parse_meta_kind(ts: TokenStream) -> MetaEntityKind:
    tok = ts.expect("ident", what="entity kind")
    if tok.text in _META_KIND_NAMES:
        return _META_KIND_NAMES[tok.text]
    if tok.text == "Artifact":
        ts.expect("op", ".", what="'.' (Artifact kinds must pick Document or Object)")
        sub = ts.expect("ident", what="Document or Object")
        if sub.text == DOCUMENT_SUBKIND:
            return DOCUMENT
        if sub.text == OBJECT_SUBKIND:
            return OBJECT
        ts.fail(f"unknown artifact subkind {sub.text!r}", sub)
    ts.fail(f"unknown meta kind {tok.text!r}", tok)
    raise AssertionError("unreachable")


def parse_scalar_type(ts: TokenStream) -> ScalarType:
    tok = ts.expect("ident", what="scalar kind")
    if tok.text in ("string", "integer", "date"):
        return ScalarType(tok.text)
    if tok.text == "enum":
        ts.expect("op", "(")
        values = [ts.expect("ident", what="enum value").text]
        while ts.accept("op", ","):
            values.append(ts.expect("ident", what="enum value").text)
        ts.expect("op", ")")
        if len(set(values)) != len(values):
            ts.fail("duplicate enum value", tok)
        return ScalarType("enum", tuple(values))
    ts.fail(f"unknown scalar kind {tok.text!r}", tok)
    raise AssertionError("unreachable")


def _parse_relation_decl(
    ts: TokenStream,
    mm: Metamodel,
    seen: dict[str, Token],
    type_tokens: dict[str, Token],
    types: list[DomainType],
) -> DomainRelation:
    name_tok = ts.expect("ident", what="relation name")
    if name_tok.text in seen:
        ts.fail(f"duplicate relation name {name_tok.text!r}", name_tok)
    seen[name_tok.text] = name_tok
    ts.expect("op", ":")
    src_tok = ts.expect("ident", what="source type")
    ts.expect("op", "->")
    tgt_tok = ts.expect("ident", what="target type")
    ts.expect("ident", "via")
    kind_tok = ts.expect("ident", what="meta relation kind")
    kind = mm.relation_kind(kind_tok.text)
    if kind is None:
        ts.fail(f"unknown meta relation kind {kind_tok.text!r}", kind_tok)
        raise AssertionError("unreachable")
    cardinality = "many"
    if ts.check("ident", "one") or ts.check("ident", "many"):
        cardinality = ts.advance().text

    by_name = {t.name: t for t in types}
    for tok, declared in ((src_tok, "source"), (tgt_tok, "target")):
        if tok.text not in by_name:
            ts.fail(f"relation {name_tok.text!r}: unknown {declared} type {tok.text!r}", tok)
    src_type = by_name[src_tok.text]
    tgt_type = by_name[tgt_tok.text]
    if not kind.source_kind.accepts(src_type.meta_kind):
        ts.fail(
            f"kind mismatch in relation {name_tok.text!r}: source {src_type.name!r} is "
            f"{src_type.meta_kind}, {kind.name!r} requires {kind.source_kind}",
            src_tok,
        )
    if not kind.target_kind.accepts(tgt_type.meta_kind):
        ts.fail(
            f"kind mismatch in relation {name_tok.text!r}: target {tgt_type.name!r} is "
            f"{tgt_type.meta_kind}, {kind.name!r} requires {kind.target_kind}",
            tgt_tok,
        )
    return DomainRelation(name_tok.text, kind, src_tok.text, tgt_tok.text, cardinality)


def print_domain_model(dm: DomainModel) -> str:
    """Canonical domain-model text; parsing it back yields an equal model."""
    lines: list[str] = []
    for t in dm.types:
        lines.append(f"type {t.name} : {t.meta_kind} {{")
        for attr in t.attributes:
            lines.append(f"  {attr.name}: {attr.type}")
        lines.append("}")
    if dm.types and dm.relations:
        lines.append("")
    for r in dm.relations:
        lines.append(
            f"relation {r.name} : {r.source_type} -> {r.target_type} "
            f"via {r.meta_relation.name} {r.cardinality}"
        )
    return "\n".join(lines) + ("\n" if lines else "")


# --------------------------------------------------------------------------
# Conformance reports


@dataclass(frozen=True)
class Violation:
    code: str
    element: str  # node or edge id, element key, or rule name
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def diagnostics(self) -> list[str]:
        return [f"{v.element}: {v.message}" for v in self.violations]

    @staticmethod
    def build(violations: Iterable[Violation]) -> "ValidationReport":
        ordered = tuple(sorted(violations, key=lambda v: (v.element, v.code, v.message)))
        return ValidationReport(ordered)


def validate_graph(dm: DomainModel, g: "ContextGraph") -> ValidationReport:
    """Check a context graph against its domain model.

    Violations are data, not exceptions: the report is empty iff the graph
    conforms. Output order is canonical (element id, then code).
    """
    out: list[Violation] = []
    for node_id in g.nodes:
        node = g.nodes[node_id]
        dtype = dm.type_named(node.domain_type)
        if dtype is None:
            out.append(Violation("unknown_type", node_id, f"unknown type {node.domain_type!r}"))
            continue
        declared = {a.name for a in dtype.attributes}
        for attr in dtype.attributes:
            if attr.name not in node.attributes:
                out.append(
                    Violation("missing_attribute", node_id, f"missing attribute {attr.name!r}")
                )
            elif not attr.type.check(node.attributes[attr.name]):
                out.append(
                    Violation(
                        "attribute_kind",
                        node_id,
                        f"attribute {attr.name!r} is not a valid {attr.type}",
                    )
                )
        for name in node.attributes:
            if name not in declared:
                out.append(Violation("unknown_attribute", node_id, f"unknown attribute {name!r}"))

    one_count: dict[tuple[str, str], int] = {}
    for edge in g.edges:
        rel = dm.relation_named(edge.relation)
        if rel is None:
            out.append(
                Violation("unknown_relation", edge.edge_id, f"unknown relation {edge.relation!r}")
            )
            continue
        src = g.nodes[edge.source]
        tgt = g.nodes[edge.target]
        if src.domain_type != rel.source_type:
            out.append(
                Violation(
                    "endpoint_type",
                    edge.edge_id,
                    f"relation {rel.name!r} requires source {rel.source_type!r}, "
                    f"got {src.domain_type!r} ({edge.source})",
                )
            )
        if tgt.domain_type != rel.target_type:
            out.append(
                Violation(
                    "endpoint_type",
                    edge.edge_id,
                    f"relation {rel.name!r} requires target {rel.target_type!r}, "
                    f"got {tgt.domain_type!r} ({edge.target})",
                )
            )
        if rel.cardinality == "one":
            one_count[(rel.name, edge.source)] = one_count.get((rel.name, edge.source), 0) + 1

    for (rel_name, source), count in one_count.items():
        if count > 1:
            out.append(
                Violation(
                    "cardinality",
                    source,
                    f"relation {rel_name!r} allows one target per source, found {count}",
                )
            )
    return ValidationReport.build(out)
