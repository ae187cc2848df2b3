"""Versioned context graphs: snapshots, traversal queries, ingestion, publish.

Snapshots are immutable values; :class:`ContextStore` serializes writers and
hands out the latest snapshot to any number of concurrent readers.
"""

from __future__ import annotations

import datetime as dt
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from .lexer import TokenStream
from .metamodel import DomainModel, Scalar, validate_graph


class GraphError(Exception):
    """Base for traversal and mutation failures."""


class UnknownNodeError(GraphError):
    def __init__(self, node_id: str):
        self.node_id = node_id
        super().__init__(f"unknown node id {node_id!r}")


class UnknownRelationError(GraphError):
    def __init__(self, relation: str):
        self.relation = relation
        super().__init__(f"unknown relation {relation!r}")


class IngestError(Exception):
    """Project load rejected; carries every diagnostic at once."""

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(diagnostics))


class PublishError(Exception):
    """Delta rejected atomically; the previous snapshot stays current."""

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(diagnostics))


@dataclass(frozen=True)
class Node:
    domain_type: str
    attributes: Mapping[str, Scalar]

    def __post_init__(self) -> None:
        object.__setattr__(self, "attributes", MappingProxyType(dict(self.attributes)))


@dataclass(frozen=True)
class Edge:
    edge_id: str
    relation: str
    source: str
    target: str


class Direction(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass(frozen=True)
class PathStep:
    relation: str
    direction: Direction = Direction.FORWARD


@dataclass(frozen=True)
class PathExpression:
    steps: tuple[PathStep, ...]

    def __post_init__(self) -> None:
        if not self.steps:
            raise ValueError("path expression needs at least one step")


class ContextGraph:
    """One immutable snapshot of the cooperation context.

    Node and edge ids are unique, every edge endpoint exists, and adjacency
    indexes are built once at construction. ``declared_relations`` is the
    model's relation vocabulary; it lets traversal distinguish a declared
    relation with no edges (empty image) from a misspelled one (error).
    """

    __slots__ = ("version", "nodes", "edges", "declared_relations", "_out", "_in")

    def __init__(
        self,
        version: int,
        nodes: Mapping[str, Node],
        edges: Iterable[Edge],
        declared_relations: frozenset[str] | None = None,
    ):
        edge_list = tuple(edges)
        seen_edges: set[str] = set()
        for e in edge_list:
            if e.edge_id in seen_edges:
                raise GraphError(f"duplicate edge id {e.edge_id!r}")
            seen_edges.add(e.edge_id)
            for endpoint in (e.source, e.target):
                if endpoint not in nodes:
                    raise GraphError(f"edge {e.edge_id!r} references missing node {endpoint!r}")
        self.version = version
        self.nodes: Mapping[str, Node] = MappingProxyType(dict(nodes))
        self.edges: tuple[Edge, ...] = edge_list
        if declared_relations is None:
            declared_relations = frozenset(e.relation for e in edge_list)
        self.declared_relations = declared_relations
        out: dict[tuple[str, str], list[str]] = {}
        inc: dict[tuple[str, str], list[str]] = {}
        for e in edge_list:
            out.setdefault((e.relation, e.source), []).append(e.target)
            inc.setdefault((e.relation, e.target), []).append(e.source)
        self._out = out
        self._in = inc

    def targets(self, node_id: str, relation: str) -> tuple[str, ...]:
        return tuple(self._out.get((relation, node_id), ()))

    def sources(self, node_id: str, relation: str) -> tuple[str, ...]:
        return tuple(self._in.get((relation, node_id), ()))


def neighbors(
    g: ContextGraph, node_id: str, relation: str, direction: Direction = Direction.FORWARD
) -> frozenset[str]:
    """Endpoints reachable from ``node_id`` over one matching edge."""
    if node_id not in g.nodes:
        raise UnknownNodeError(node_id)
    if direction is Direction.FORWARD:
        return frozenset(g.targets(node_id, relation))
    return frozenset(g.sources(node_id, relation))


def walk(g: ContextGraph, start: Iterable[str], path: PathExpression) -> frozenset[str]:
    """Image of the start set under the composition of the path's steps."""
    current = frozenset(start)
    for node_id in current:
        if node_id not in g.nodes:
            raise UnknownNodeError(node_id)
    for step in path.steps:
        if step.relation not in g.declared_relations:
            raise UnknownRelationError(step.relation)
        nxt: set[str] = set()
        for node_id in current:
            if step.direction is Direction.FORWARD:
                nxt.update(g.targets(node_id, step.relation))
            else:
                nxt.update(g.sources(node_id, step.relation))
        current = frozenset(nxt)
    return current


@dataclass(frozen=True)
class Delta:
    add_nodes: tuple[tuple[str, Node], ...] = ()
    remove_nodes: tuple[str, ...] = ()
    add_edges: tuple[Edge, ...] = ()
    remove_edges: tuple[str, ...] = ()


def publish(dm: DomainModel, g: ContextGraph, delta: Delta) -> ContextGraph:
    """Produce the next snapshot, or raise :class:`PublishError` atomically."""
    problems: list[str] = []
    nodes = dict(g.nodes)
    edges = {e.edge_id: e for e in g.edges}

    for node_id in delta.remove_nodes:
        if node_id not in nodes:
            problems.append(f"remove_node: unknown node {node_id!r}")
        else:
            del nodes[node_id]
    for edge_id in delta.remove_edges:
        if edge_id not in edges:
            problems.append(f"remove_edge: unknown edge {edge_id!r}")
        else:
            del edges[edge_id]
    for node_id, node in delta.add_nodes:
        if node_id in nodes:
            problems.append(f"add_node: duplicate node id {node_id!r}")
        else:
            nodes[node_id] = node
    for edge in delta.add_edges:
        if edge.edge_id in edges:
            problems.append(f"add_edge: duplicate edge id {edge.edge_id!r}")
        else:
            edges[edge.edge_id] = edge
    for edge in edges.values():
        for endpoint in (edge.source, edge.target):
            if endpoint not in nodes:
                problems.append(f"edge {edge.edge_id!r} references missing node {endpoint!r}")
    if problems:
        raise PublishError(sorted(problems))

    declared = frozenset(r.name for r in dm.relations)
    candidate = ContextGraph(g.version + 1, nodes, edges.values(), declared)
    report = validate_graph(dm, candidate)
    if not report.ok:
        raise PublishError(report.diagnostics())
    return candidate


class ContextStore:
    """Holds the current snapshot; publish is serialized, reads never block."""

    def __init__(self, dm: DomainModel, graph: ContextGraph):
        self._dm = dm
        self._graph = graph
        self._lock = threading.Lock()

    @property
    def domain_model(self) -> DomainModel:
        return self._dm

    def current(self) -> ContextGraph:
        return self._graph

    @property
    def version(self) -> int:
        return self._graph.version

    def publish(self, delta: Delta) -> ContextGraph:
        with self._lock:
            self._graph = publish(self._dm, self._graph, delta)
            return self._graph


# --------------------------------------------------------------------------
# .cpj ingestion


def parse_project(text: str, dm: DomainModel, filename: str | None = None) -> ContextGraph:
    """Parse and validate a project file into a version-1 snapshot.

    Syntax errors raise :class:`ParseError`; structural problems (dangling
    edges, duplicate ids) and model violations raise :class:`IngestError`
    carrying the full diagnostic list.
    """
    ts = TokenStream.from_text(text, filename, mode="project")
    nodes: dict[str, Node] = {}
    edges: list[Edge] = []
    problems: list[str] = []
    edge_counter = 0

    while not ts.at_end():
        if ts.check("atom", "node"):
            ts.advance()
            _parse_node_line(ts, dm, nodes, problems)
        elif ts.check("atom", "edge"):
            ts.advance()
            rel_tok = ts.expect("atom", what="relation name")
            src_tok = ts.expect("atom", what="source node id")
            ts.expect("op", "->")
            tgt_tok = ts.expect("atom", what="target node id")
            edge_counter += 1
            edges.append(Edge(f"e{edge_counter}", rel_tok.text, src_tok.text, tgt_tok.text))
        else:
            ts.fail(f"expected 'node' or 'edge', found {ts.current.text!r}")

    for e in edges:
        for endpoint in (e.source, e.target):
            if endpoint not in nodes:
                problems.append(f"edge {e.relation} {e.source} -> {e.target}: unknown node {endpoint!r}")
    if problems:
        raise IngestError(sorted(problems))

    graph = ContextGraph(1, nodes, edges, frozenset(r.name for r in dm.relations))
    report = validate_graph(dm, graph)
    if not report.ok:
        raise IngestError(report.diagnostics())
    return graph


def _parse_node_line(
    ts: TokenStream, dm: DomainModel, nodes: dict[str, Node], problems: list[str]
) -> None:
    id_tok = ts.expect("atom", what="node id")
    if id_tok.text in nodes:
        ts.fail(f"duplicate node id {id_tok.text!r}", id_tok)
    ts.expect("op", ":")
    type_tok = ts.expect("atom", what="node type")
    dtype = dm.type_named(type_tok.text)
    ts.expect("op", "{")
    attrs: dict[str, Scalar] = {}
    while not ts.check("op", "}"):
        attr_tok = ts.expect("atom", what="attribute name")
        ts.expect("op", "=")
        if ts.check("string"):
            raw: Scalar = str(ts.advance().value)
        else:
            raw = ts.expect("atom", what="attribute value").text
        if attr_tok.text in attrs:
            ts.fail(f"duplicate attribute {attr_tok.text!r}", attr_tok)
        decl = dtype.attribute(attr_tok.text) if dtype else None
        if decl is not None and isinstance(raw, str):
            coerced = _coerce(raw, decl.type.kind)
            if coerced is None:
                ts.fail(
                    f"attribute {attr_tok.text!r} of {id_tok.text!r}: "
                    f"cannot read {raw!r} as {decl.type.kind}",
                    attr_tok,
                )
            attrs[attr_tok.text] = coerced
        else:
            attrs[attr_tok.text] = raw
    ts.expect("op", "}")
    nodes[id_tok.text] = Node(type_tok.text if dtype is None else dtype.name, attrs)


def _coerce(raw: str, kind: str) -> Scalar | None:
    if kind == "integer":
        try:
            return int(raw)
        except ValueError:
            return None
    if kind == "date":
        try:
            return dt.date.fromisoformat(raw)
        except ValueError:
            return None
    return raw  # string and enum stay textual; enum membership is validated later


def load_project(dm: DomainModel, path: str | Path) -> ContextGraph:
    p = Path(path)
    return parse_project(p.read_text(encoding="utf-8"), dm, filename=str(p))


def parse_delta_document(dm: DomainModel, doc: object) -> Delta:
    """Build a delta from its JSON document form (the publish payload).

    Attribute values arrive as JSON scalars; dates are ISO strings and get
    coerced using the declared attribute kinds. Shape problems raise
    :class:`ValueError` with a readable message.
    """
    if not isinstance(doc, dict):
        raise ValueError("delta document must be a JSON object")
    allowed = {"add_nodes", "remove_nodes", "add_edges", "remove_edges"}
    unknown = set(doc) - allowed
    if unknown:
        raise ValueError(f"unknown delta keys: {sorted(unknown)}")

    add_nodes: list[tuple[str, Node]] = []
    for i, entry in enumerate(_str_keyed_list(doc, "add_nodes")):
        if set(entry) != {"id", "type", "attributes"} or not isinstance(entry.get("attributes"), dict):
            raise ValueError(f"add_nodes[{i}] needs id, type and attributes")
        node_id, type_name = str(entry["id"]), str(entry["type"])
        dtype = dm.type_named(type_name)
        attrs: dict[str, Scalar] = {}
        for name, value in entry["attributes"].items():
            decl = dtype.attribute(name) if dtype else None
            if decl is not None and isinstance(value, str):
                coerced = _coerce(value, decl.type.kind)
                if coerced is None:
                    raise ValueError(
                        f"add_nodes[{i}]: attribute {name!r} cannot be read as {decl.type.kind}"
                    )
                attrs[name] = coerced
            elif isinstance(value, (str, int)) and not isinstance(value, bool):
                attrs[name] = value
            else:
                raise ValueError(f"add_nodes[{i}]: attribute {name!r} must be a string or integer")
        add_nodes.append((node_id, Node(type_name, attrs)))

    add_edges: list[Edge] = []
    for i, entry in enumerate(_str_keyed_list(doc, "add_edges")):
        if set(entry) != {"id", "relation", "source", "target"}:
            raise ValueError(f"add_edges[{i}] needs id, relation, source and target")
        add_edges.append(
            Edge(str(entry["id"]), str(entry["relation"]), str(entry["source"]), str(entry["target"]))
        )

    return Delta(
        add_nodes=tuple(add_nodes),
        remove_nodes=tuple(str(x) for x in _string_list(doc, "remove_nodes")),
        add_edges=tuple(add_edges),
        remove_edges=tuple(str(x) for x in _string_list(doc, "remove_edges")),
    )


def _str_keyed_list(doc: dict, key: str) -> list[dict]:
    value = doc.get(key, [])
    if not isinstance(value, list) or not all(isinstance(x, dict) for x in value):
        raise ValueError(f"{key} must be a list of objects")
    return value


def _string_list(doc: dict, key: str) -> list[str]:
    value = doc.get(key, [])
    if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
        raise ValueError(f"{key} must be a list of ids")
    return value
