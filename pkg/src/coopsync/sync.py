"""Cross-view selection propagation and per-client session state.

Selecting an element maps it back to context nodes through its trace, closes
over the correlation relations (undirected, bounded hops), then projects the
closure forward into every other view via trace intersection.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Callable, Iterable, Mapping

from .content import ViewContent
from .graph import ContextGraph, ContextStore
from .metamodel import DomainModel
from .rules import COORDINATOR_ROLE, RoleFilter, RuleSet, TraceMap, generate
from .views import ViewConceptModel

#: Relation names treated as correspondence-bearing when the model has them.
DEFAULT_CORRELATION_NAMES = ("concerne", "concerns", "refers_to", "produces")
DEFAULT_MAX_HOPS = 2


class SyncError(Exception):
    pass


class UnknownSessionError(SyncError):
    pass


class UnknownViewError(SyncError):
    def __init__(self, view_id: str):
        self.view_id = view_id
        super().__init__(f"unknown view {view_id!r}")


class UnknownElementError(SyncError):
    def __init__(self, view_id: str, element_key: str):
        self.view_id = view_id
        self.element_key = element_key
        super().__init__(f"no element {element_key!r} in view {view_id!r}")


class UnknownRoleError(SyncError):
    def __init__(self, role: str):
        self.role = role
        super().__init__(f"unknown role {role!r}")


class ArrangementError(SyncError):
    pass


class StaleVersionError(SyncError):
    """The client selected against an outdated snapshot; it must resync."""

    def __init__(self, current_version: int):
        self.current_version = current_version
        super().__init__(f"stale graph version; current is {current_version}")


@dataclass(frozen=True)
class SelectionEvent:
    session_id: str
    view_id: str
    element_key: str
    graph_version: int


@dataclass(frozen=True)
class CorrelationConfig:
    relations: frozenset[str]
    max_hops: int = DEFAULT_MAX_HOPS

    def __post_init__(self) -> None:
        if self.max_hops < 0:
            raise ValueError("max_hops must be >= 0")

    @classmethod
    def default(cls, dm: DomainModel) -> "CorrelationConfig":
        declared = {r.name for r in dm.relations}
        return cls(frozenset(n for n in DEFAULT_CORRELATION_NAMES if n in declared))


@dataclass(frozen=True)
class HighlightDirective:
    origin_view: str
    origin_key: str
    highlights: Mapping[str, frozenset[str]]
    graph_version: int

    def __post_init__(self) -> None:
        if self.origin_view in self.highlights:
            raise ValueError("origin view cannot be highlighted")
        object.__setattr__(self, "highlights", MappingProxyType(dict(self.highlights)))


def correlation_closure(
    g: ContextGraph, seeds: Iterable[str], config: CorrelationConfig
) -> frozenset[str]:
    """Nodes within ``max_hops`` of the seeds over correlation relations,
    edges traversed in both directions."""
    closure = set(seeds)
    frontier = set(seeds)
    for _ in range(config.max_hops):
        nxt: set[str] = set()
        for node_id in frontier:
            for relation in config.relations:
                nxt.update(g.targets(node_id, relation))
                nxt.update(g.sources(node_id, relation))
        nxt -= closure
        if not nxt:
            break
        closure.update(nxt)
        frontier = nxt
    return frozenset(closure)


def propagate(
    event: SelectionEvent,
    traces: Mapping[str, TraceMap],
    g: ContextGraph,
    config: CorrelationConfig,
) -> HighlightDirective:
    """Compute the highlight sets for every non-origin view."""
    origin = traces.get(event.view_id)
    if origin is None:
        raise UnknownViewError(event.view_id)
    seed = origin.entries.get(event.element_key)
    if seed is None:
        raise UnknownElementError(event.view_id, event.element_key)
    closure = correlation_closure(g, seed, config)
    highlights: dict[str, frozenset[str]] = {}
    for view_id, trace_map in traces.items():
        if view_id == event.view_id:
            continue
        highlights[view_id] = frozenset(
            key for key, nodes in trace_map.entries.items() if nodes & closure
        )
    return HighlightDirective(event.view_id, event.element_key, highlights, event.graph_version)


# --------------------------------------------------------------------------
# Sessions


@dataclass
class Session:
    session_id: str
    role: str
    arrangement: tuple[str, ...]
    graph_version: int
    contents: dict[str, ViewContent]
    traces: dict[str, TraceMap]


class SessionManager:
    """One session per connected client: role, arrangement, generated views.

    Contents of a session are always generated together from one snapshot;
    selects against any other version are answered with a stale signal.
    """

    def __init__(
        self,
        store: ContextStore,
        views: tuple[ViewConceptModel, ...],
        ruleset: RuleSet,
        correlation: CorrelationConfig | None = None,
        role_filter_factory: Callable[[DomainModel, str], RoleFilter] | None = None,
    ):
        from .rules import standard_role_filter

        self._store = store
        self._views = {v.view_id: v for v in views}
        self._ruleset = ruleset
        self._correlation = correlation or CorrelationConfig.default(store.domain_model)
        self._filter_factory = role_filter_factory or standard_role_filter
        self._sessions: dict[str, Session] = {}

    @property
    def views(self) -> Mapping[str, ViewConceptModel]:
        return self._views

    @property
    def correlation(self) -> CorrelationConfig:
        return self._correlation

    def known_roles(self) -> frozenset[str]:
        """Coordinator plus every role carried by an actor in the snapshot."""
        g = self._store.current()
        dm = self._store.domain_model
        actor_types = {t.name for t in dm.types if t.meta_kind.name == "Actor"}
        roles = {
            str(node.attributes["role"])
            for node in g.nodes.values()
            if node.domain_type in actor_types and "role" in node.attributes
        }
        roles.add(COORDINATOR_ROLE)
        return frozenset(roles)

    def _check_arrangement(self, arrangement: Iterable[str]) -> tuple[str, ...]:
        arranged = tuple(arrangement)
        if not arranged:
            raise ArrangementError("arrangement cannot be empty")
        seen: set[str] = set()
        for view_id in arranged:
            if view_id not in self._views:
                raise UnknownViewError(view_id)
            if view_id in seen:
                raise ArrangementError(f"duplicate view {view_id!r} in arrangement")
            seen.add(view_id)
        return arranged

    def _build(self, session: Session) -> None:
        g = self._store.current()
        role_filter = self._filter_factory(self._store.domain_model, session.role)
        contents: dict[str, ViewContent] = {}
        traces: dict[str, TraceMap] = {}
        for view_id in session.arrangement:
            content, trace = generate(self._ruleset, g, self._views[view_id], role_filter)
            contents[view_id] = content
            traces[view_id] = trace
        session.graph_version = g.version
        session.contents = contents
        session.traces = traces

    def hello(self, session_id: str, role: str, arrangement: Iterable[str]) -> Session:
        arranged = self._check_arrangement(arrangement)
        if role != COORDINATOR_ROLE and role not in self.known_roles():
            raise UnknownRoleError(role)
        session = Session(session_id, role, arranged, 0, {}, {})
        self._build(session)
        self._sessions[session_id] = session
        return session

    def drop(self, session_id: str) -> None:
        self._sessions.pop(session_id, None)

    def session(self, session_id: str) -> Session:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise UnknownSessionError(f"unknown session {session_id!r}") from None

    def register_arrangement(self, session_id: str, arrangement: Iterable[str]) -> Session:
        session = self.session(session_id)
        session.arrangement = self._check_arrangement(arrangement)
        self._build(session)
        return session

    def session_snapshot(self, session_id: str) -> tuple[int, dict[str, ViewContent], str]:
        """Resync the session to the current snapshot; contents are mutually
        consistent (same graph version)."""
        session = self.session(session_id)
        if session.graph_version != self._store.version:
            self._build(session)
        return session.graph_version, dict(session.contents), session.role

    def handle_select(self, event: SelectionEvent) -> HighlightDirective:
        session = self.session(event.session_id)
        current = self._store.version
        if event.graph_version != current or session.graph_version != current:
            raise StaleVersionError(current)
        if event.view_id not in session.traces:
            raise UnknownViewError(event.view_id)
        return propagate(event, session.traces, self._store.current(), self._correlation)
