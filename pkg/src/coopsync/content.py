"""Generated view documents: canonical text form, wire form, and parsing.

The text form is byte-deterministic: strings (including enum members) are
JSON-quoted, dates and integers are bare, fields appear one per line sorted
by name, elements in the order the generator produced (concept, then key).
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass
from types import MappingProxyType
from typing import Any, Mapping

from .lexer import TokenStream
from .metamodel import Scalar


@dataclass(frozen=True)
class Element:
    concept: str
    key: str
    fields: Mapping[str, Scalar]

    def __post_init__(self) -> None:
        object.__setattr__(self, "fields", MappingProxyType(dict(self.fields)))


@dataclass(frozen=True)
class ViewContent:
    view_id: str
    graph_version: int
    elements: tuple[Element, ...]

    def keys(self) -> frozenset[str]:
        return frozenset(e.key for e in self.elements)

    def element(self, key: str) -> Element | None:
        for e in self.elements:
            if e.key == key:
                return e
        return None


def render_scalar(value: Scalar) -> str:
    if isinstance(value, bool):
        raise TypeError("boolean is not a content scalar")
    if isinstance(value, dt.date):
        return value.isoformat()
    if isinstance(value, int):
        return str(value)
    return json.dumps(value, ensure_ascii=False)


def render_content(content: ViewContent) -> str:
    lines = [f"content {content.view_id} version {content.graph_version}"]
    for element in content.elements:
        lines.append(f"element {element.concept} {json.dumps(element.key, ensure_ascii=False)} {{")
        for name in sorted(element.fields):
            lines.append(f"  {name} = {render_scalar(element.fields[name])}")
        lines.append("}")
    return "\n".join(lines) + "\n"


def parse_content(text: str, filename: str | None = None) -> ViewContent:
    """Inverse of :func:`render_content` (typed: dates and integers restored)."""
    ts = TokenStream.from_text(text, filename, mode="dsl")
    ts.expect("ident", "content")
    view_tok = ts.expect("ident", what="view id")
    ts.expect("ident", "version")
    version_tok = ts.expect("int", what="graph version")
    elements: list[Element] = []
    while not ts.at_end():
        ts.expect("ident", "element")
        concept_tok = ts.expect("ident", what="concept name")
        key_tok = ts.expect("string", what="element key")
        ts.expect("op", "{")
        fields: dict[str, Scalar] = {}
        while not ts.check("op", "}"):
            name_tok = ts.expect("ident", what="field name")
            if name_tok.text in fields:
                ts.fail(f"duplicate field {name_tok.text!r}", name_tok)
            ts.expect("op", "=")
            if ts.check("string") or ts.check("int") or ts.check("date"):
                fields[name_tok.text] = ts.advance().value  # type: ignore[assignment]
            else:
                ts.fail(f"expected field value, found {ts.current.text!r}")
        ts.expect("op", "}")
        elements.append(Element(concept_tok.text, str(key_tok.value), fields))
    return ViewContent(view_tok.text, int(version_tok.value), tuple(elements))


def content_document(content: ViewContent) -> dict[str, Any]:
    """Wire (JSON) form; dates become ISO strings."""
    return {
        "view_id": content.view_id,
        "graph_version": content.graph_version,
        "elements": [
            {
                "concept": e.concept,
                "key": e.key,
                "fields": {
                    name: (value.isoformat() if isinstance(value, dt.date) else value)
                    for name, value in sorted(e.fields.items())
                },
            }
            for e in content.elements
        ],
    }
