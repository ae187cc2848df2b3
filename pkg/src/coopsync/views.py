"""View concept models, schema emission, and content validation.

Each view declares the concepts it displays. A schema is the canonical text
artifact derived from the concept model; generated content must validate
against it. The four built-in views cover the weekly report, the works
planning, the schematic 3D mockup, and the running remarks list.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

from .content import Element, ViewContent
from .lexer import ParseError, TokenStream
from .metamodel import (
    DATE,
    INTEGER,
    STRING,
    ScalarType,
    ValidationReport,
    Violation,
    enum_of,
    parse_scalar_type,
)

PROGRESS_STATES = ("planned", "in_progress", "done", "late")
REMARK_STATES = ("open", "closed")


@dataclass(frozen=True)
class FieldDecl:
    name: str
    type: ScalarType


@dataclass(frozen=True)
class Concept:
    name: str
    fields: tuple[FieldDecl, ...]
    key_field: str

    def __post_init__(self) -> None:
        names = [f.name for f in self.fields]
        if len(set(names)) != len(names):
            raise ValueError(f"concept {self.name!r}: duplicate field names")
        key = self.field(self.key_field)
        if key is None:
            raise ValueError(f"concept {self.name!r}: key field {self.key_field!r} not declared")
        if key.type.kind != "string":
            raise ValueError(f"concept {self.name!r}: key field must be a string")

    def field(self, name: str) -> FieldDecl | None:
        for f in self.fields:
            if f.name == name:
                return f
        return None


@dataclass(frozen=True)
class IntraViewLink:
    source_concept: str
    field: str
    target_concept: str


@dataclass(frozen=True)
class ViewConceptModel:
    view_id: str
    concepts: tuple[Concept, ...]
    links: tuple[IntraViewLink, ...] = ()

    def __post_init__(self) -> None:
        names = [c.name for c in self.concepts]
        if len(set(names)) != len(names):
            raise ValueError(f"view {self.view_id!r}: duplicate concept names")
        for link in self.links:
            src = self.concept(link.source_concept)
            if src is None or self.concept(link.target_concept) is None:
                raise ValueError(f"view {self.view_id!r}: link references unknown concept")
            decl = src.field(link.field)
            if decl is None or decl.type.kind != "string":
                raise ValueError(
                    f"view {self.view_id!r}: link field {link.field!r} must be a string field "
                    f"of {link.source_concept!r}"
                )

    def concept(self, name: str) -> Concept | None:
        for c in self.concepts:
            if c.name == name:
                return c
        return None


_BUILTIN_VIEWS = (
    ViewConceptModel(
        "planning",
        concepts=(
            Concept(
                "Task",
                (
                    FieldDecl("id", STRING),
                    FieldDecl("label", STRING),
                    FieldDecl("start", DATE),
                    FieldDecl("end", DATE),
                    FieldDecl("progress_state", enum_of(*PROGRESS_STATES)),
                    FieldDecl("resource", STRING),
                ),
                key_field="id",
            ),
            Concept("Resource", (FieldDecl("id", STRING), FieldDecl("label", STRING)), "id"),
        ),
        links=(IntraViewLink("Task", "resource", "Resource"),),
    ),
    ViewConceptModel(
        "report",
        concepts=(
            Concept("Report", (FieldDecl("id", STRING), FieldDecl("date", DATE)), "id"),
            Concept("GeneralInfo", (FieldDecl("id", STRING), FieldDecl("text", STRING)), "id"),
            Concept(
                "Remark",
                (
                    FieldDecl("id", STRING),
                    FieldDecl("number", INTEGER),
                    FieldDecl("text", STRING),
                    FieldDecl("status", enum_of(*REMARK_STATES)),
                ),
                "id",
            ),
        ),
    ),
    ViewConceptModel(
        "mockup",
        concepts=(
            Concept(
                "Object3D",
                (
                    FieldDecl("id", STRING),
                    FieldDecl("label", STRING),
                    FieldDecl("geometry_ref", STRING),
                ),
                "id",
            ),
        ),
    ),
    ViewConceptModel(
        "remarks_list",
        concepts=(
            Concept(
                "RemarkEntry",
                (
                    FieldDecl("id", STRING),
                    FieldDecl("number", INTEGER),
                    FieldDecl("text", STRING),
                    FieldDecl("report_date", DATE),
                    FieldDecl("status", enum_of(*REMARK_STATES)),
                ),
                "id",
            ),
        ),
    ),
)


def builtin_views() -> tuple[ViewConceptModel, ...]:
    """The four built-in view concept models."""
    return _BUILTIN_VIEWS


# --------------------------------------------------------------------------
# Schemas


@dataclass(frozen=True)
class ViewSchema:
    view_id: str
    schema_document: str


def emit_schema(view: ViewConceptModel) -> ViewSchema:
    """Derive the canonical schema text; byte-identical per concept model."""
    lines = [f"schema {view.view_id}"]
    for concept in sorted(view.concepts, key=lambda c: c.name):
        lines.append(f"concept {concept.name} {{")
        lines.append(f"  key {concept.key_field}")
        for f in sorted(concept.fields, key=lambda f: f.name):
            lines.append(f"  field {f.name} : {f.type}")
        lines.append("}")
    for link in sorted(view.links, key=lambda l: (l.source_concept, l.field)):
        lines.append(f"link {link.source_concept}.{link.field} -> {link.target_concept}")
    return ViewSchema(view.view_id, "\n".join(lines) + "\n")


def parse_schema(text: str, filename: str | None = None) -> ViewConceptModel:
    """Read a schema document back into a concept model."""
    ts = TokenStream.from_text(text, filename, mode="dsl")
    ts.expect("ident", "schema")
    view_tok = ts.expect("ident", what="view id")
    return _parse_view_body(ts, view_tok.text, stop_at_view=False)


def parse_view_models(text: str, filename: str | None = None) -> tuple[ViewConceptModel, ...]:
    """Parse one or more ``view`` blocks (.cvm files)."""
    ts = TokenStream.from_text(text, filename, mode="dsl")
    views: list[ViewConceptModel] = []
    seen: set[str] = set()
    while not ts.at_end():
        ts.expect("ident", "view")
        view_tok = ts.expect("ident", what="view id")
        if view_tok.text in seen:
            ts.fail(f"duplicate view id {view_tok.text!r}", view_tok)
        seen.add(view_tok.text)
        ts.expect("op", "{")
        views.append(_parse_view_body(ts, view_tok.text, stop_at_view=True))
        ts.expect("op", "}")
    return tuple(views)


def _parse_view_body(ts: TokenStream, view_id: str, stop_at_view: bool) -> ViewConceptModel:
    concepts: list[Concept] = []
    links: list[IntraViewLink] = []
    while True:
        if ts.check("ident", "concept"):
            ts.advance()
            name_tok = ts.expect("ident", what="concept name")
            ts.expect("op", "{")
            ts.expect("ident", "key")
            key_tok = ts.expect("ident", what="key field name")
            fields: list[FieldDecl] = []
            while ts.check("ident", "field"):
                ts.advance()
                field_tok = ts.expect("ident", what="field name")
                ts.expect("op", ":")
                fields.append(FieldDecl(field_tok.text, parse_scalar_type(ts)))
            ts.expect("op", "}")
            try:
                concepts.append(Concept(name_tok.text, tuple(fields), key_tok.text))
            except ValueError as exc:
                ts.fail(str(exc), name_tok)
        elif ts.check("ident", "link"):
            ts.advance()
            src_tok = ts.expect("ident", what="concept name")
            ts.expect("op", ".")
            field_tok = ts.expect("ident", what="link field")
            ts.expect("op", "->")
            tgt_tok = ts.expect("ident", what="concept name")
            links.append(IntraViewLink(src_tok.text, field_tok.text, tgt_tok.text))
        else:
            break
    first = ts.current
    try:
        return ViewConceptModel(view_id, tuple(concepts), tuple(links))
    except ValueError as exc:
        raise ParseError(str(exc), first.line, first.col, ts.filename) from None


# --------------------------------------------------------------------------
# Content validation


def validate_content(schema: ViewSchema, content: ViewContent) -> ValidationReport:
    """Empty report iff the content conforms to the schema."""
    model = parse_schema(schema.schema_document)
    out: list[Violation] = []
    if content.view_id != schema.view_id:
        out.append(
            Violation(
                "view_id",
                content.view_id,
                f"content is for view {content.view_id!r}, schema for {schema.view_id!r}",
            )
        )
    keys_by_concept: dict[str, set[str]] = {c.name: set() for c in model.concepts}
    seen_keys: set[str] = set()
    for element in content.elements:
        concept = model.concept(element.concept)
        if concept is None:
            out.append(
                Violation("unknown_concept", element.key, f"unknown concept {element.concept!r}")
            )
            continue
        if element.key in seen_keys:
            out.append(Violation("duplicate_key", element.key, "duplicate element key"))
        seen_keys.add(element.key)
        keys_by_concept[element.concept].add(element.key)
        declared = {f.name for f in concept.fields}
        for f in concept.fields:
            if f.name not in element.fields:
                out.append(
                    Violation("missing_field", element.key, f"missing field {f.name!r}")
                )
            elif not f.type.check(element.fields[f.name]):
                out.append(
                    Violation(
                        "field_kind",
                        element.key,
                        f"field {f.name!r} is not a valid {f.type}",
                    )
                )
        for name in element.fields:
            if name not in declared:
                out.append(Violation("unknown_field", element.key, f"unknown field {name!r}"))
        key_value = element.fields.get(concept.key_field)
        if key_value is not None and key_value != element.key:
            out.append(
                Violation(
                    "key_mismatch",
                    element.key,
                    f"key field {concept.key_field!r} value {key_value!r} differs from key",
                )
            )
    for link in model.links:
        targets = keys_by_concept.get(link.target_concept, set())
        for element in content.elements:
            if element.concept != link.source_concept:
                continue
            value = element.fields.get(link.field)
            if isinstance(value, str) and value not in targets:
                out.append(
                    Violation(
                        "dangling_link",
                        element.key,
                        f"link field {link.field!r} references missing "
                        f"{link.target_concept} {value!r}",
                    )
                )
    return ValidationReport.build(out)
