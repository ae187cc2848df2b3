"""HTTP + message-channel service around one loaded project.

HTTP serves view descriptors, schemas, content documents and the publish
endpoint; the ``/ws`` channel carries the interactive protocol (hello,
select, highlight, ...). Each connection is one session; its messages are
handled strictly in arrival order, and publish-triggered refresh pushes
never interleave inside a response batch.
"""

from __future__ import annotations

import asyncio
from dataclasses import dataclass, field
from pathlib import Path
from uuid import uuid4

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from . import wire
from .content import ViewContent, content_document, render_content
from .graph import ContextStore, PublishError, parse_delta_document
from .metamodel import DomainModel
from .rules import GenerationError, RuleSet, generate, standard_role_filter
from .sync import (
    ArrangementError,
    CorrelationConfig,
    SelectionEvent,
    SessionManager,
    StaleVersionError,
    UnknownElementError,
    UnknownRoleError,
    UnknownViewError,
)
from .views import ViewConceptModel, emit_schema


@dataclass
class AppState:
    store: ContextStore
    views: tuple[ViewConceptModel, ...]
    ruleset: RuleSet
    sessions: SessionManager
    ui_dir: Path | None = None
    connections: dict[str, "Connection"] = field(default_factory=dict)

    @property
    def domain_model(self) -> DomainModel:
        return self.store.domain_model

    def view(self, view_id: str) -> ViewConceptModel | None:
        return self.sessions.views.get(view_id)

    def generate_view(self, view_id: str, role: str) -> ViewContent:
        view = self.view(view_id)
        if view is None:
            raise UnknownViewError(view_id)
        if role != "coordinator" and role not in self.sessions.known_roles():
            raise UnknownRoleError(role)
        role_filter = standard_role_filter(self.domain_model, role)
        content, _ = generate(self.ruleset, self.store.current(), view, role_filter)
        return content


def build_state(
    store: ContextStore,
    views: tuple[ViewConceptModel, ...],
    ruleset: RuleSet,
    correlation: CorrelationConfig | None = None,
    ui_dir: Path | None = None,
) -> AppState:
    sessions = SessionManager(store, views, ruleset, correlation)
    return AppState(store, views, ruleset, sessions, ui_dir)


@dataclass
class Connection:
    socket: WebSocket
    lock: asyncio.Lock


class WsProtocol:
    """Maps one inbound message to its outbound batch.

    Every well-formed inbound message yields at least one response; selects
    yield exactly one highlight (or a refresh/error).
    """

    def __init__(self, sessions: SessionManager):
        self._sessions = sessions
        self._ready: set[str] = set()

    def drop(self, session_id: str) -> None:
        self._ready.discard(session_id)
        self._sessions.drop(session_id)

    def handle(self, session_id: str, raw: str) -> list[str]:
        try:
            message = wire.decode(raw)
        except wire.WireError as exc:
            return [wire.encode("error", code=exc.code, message=exc.message)]
        try:
            if message.kind == "hello":
                return self._hello(session_id, message)
            if session_id not in self._ready:
                return [_error("protocol", "hello must be the first message")]
            if message.kind == "select":
                return self._select(session_id, message)
            if message.kind == "arrangement":
                self._sessions.register_arrangement(session_id, message.payload["arrangement"])
                return self._snapshot_batch(session_id)
            if message.kind == "refresh":
                return self._snapshot_batch(session_id)
            return [_error("protocol", f"{message.kind} is not a client message")]
        except UnknownViewError as exc:
            return [_error("unknown_view", str(exc))]
        except UnknownRoleError as exc:
            return [_error("unknown_role", str(exc))]
        except ArrangementError as exc:
            return [_error("bad_arrangement", str(exc))]
        except UnknownElementError as exc:
            return [_error("unknown_element", str(exc))]
        except GenerationError as exc:
            return [_error("generation", str(exc))]

    def _hello(self, session_id: str, message: wire.WireMessage) -> list[str]:
        self._sessions.hello(session_id, message.payload["role"], message.payload["arrangement"])
        self._ready.add(session_id)
        return self._snapshot_batch(session_id)

    def _snapshot_batch(self, session_id: str) -> list[str]:
        version, contents, _role = self._sessions.session_snapshot(session_id)
        session = self._sessions.session(session_id)
        out = [wire.encode("ack", graph_version=version)]
        for view_id in session.arrangement:
            content = contents[view_id]
            out.append(
                wire.encode(
                    "content",
                    view_id=view_id,
                    document=content_document(content),
                    graph_version=version,
                )
            )
        return out

    def _select(self, session_id: str, message: wire.WireMessage) -> list[str]:
        event = SelectionEvent(
            session_id,
            message.payload["view_id"],
            message.payload["element_key"],
            message.payload["graph_version"],
        )
        try:
            directive = self._sessions.handle_select(event)
        except StaleVersionError as exc:
            return [wire.encode("refresh", graph_version=exc.current_version)]
        highlights = {
            view_id: sorted(keys) for view_id, keys in directive.highlights.items()
        }
        return [
            wire.encode(
                "highlight",
                origin={"view_id": directive.origin_view, "element_key": directive.origin_key},
                highlights=highlights,
                graph_version=directive.graph_version,
            )
        ]


def _error(code: str, message: str) -> str:
    return wire.encode("error", code=code, message=message)


def create_app(state: AppState) -> FastAPI:
    app = FastAPI(title="coopsync", docs_url=None, redoc_url=None)
    protocol = WsProtocol(state.sessions)

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "graph_version": state.store.version}

    @app.get("/api/views")
    def list_views() -> list[dict]:
        return [
            {
                "view_id": v.view_id,
                "concepts": [c.name for c in v.concepts],
            }
            for v in state.views
        ]

    @app.get("/api/views/{view_id}/schema")
    def view_schema(view_id: str):
        view = state.view(view_id)
        if view is None:
            return JSONResponse({"detail": f"unknown view {view_id!r}"}, status_code=404)
        return PlainTextResponse(emit_schema(view).schema_document)

    @app.get("/api/views/{view_id}/content")
    def view_content(view_id: str, role: str = "coordinator", format: str = "text"):
        try:
            content = state.generate_view(view_id, role)
        except UnknownViewError:
            return JSONResponse({"detail": f"unknown view {view_id!r}"}, status_code=404)
        except UnknownRoleError as exc:
            return JSONResponse({"detail": str(exc)}, status_code=400)
        except GenerationError as exc:
            return JSONResponse({"detail": str(exc)}, status_code=500)
        if format == "json":
            return JSONResponse(content_document(content))
        return PlainTextResponse(render_content(content))

    @app.post("/api/project/publish")
    async def publish_delta(doc: dict):
        try:
            delta = parse_delta_document(state.domain_model, doc)
        except ValueError as exc:
            return JSONResponse({"detail": [str(exc)]}, status_code=400)
        try:
            graph = state.store.publish(delta)
        except PublishError as exc:
            return JSONResponse({"detail": exc.diagnostics}, status_code=400)
        notice = wire.encode("refresh", graph_version=graph.version)
        for connection in list(state.connections.values()):
            async with connection.lock:
                try:
                    await connection.socket.send_text(notice)
                except RuntimeError:
                    pass  # connection already closing; its cleanup removes it
        return {"graph_version": graph.version}

    @app.websocket("/ws")
    async def ws_endpoint(socket: WebSocket) -> None:
        await socket.accept()
        session_id = uuid4().hex
        connection = Connection(socket, asyncio.Lock())
        state.connections[session_id] = connection
        try:
            while True:
                raw = await socket.receive_text()
                responses = protocol.handle(session_id, raw)
                async with connection.lock:
                    for response in responses:
                        await socket.send_text(response)
        except WebSocketDisconnect:
            pass
        finally:
            state.connections.pop(session_id, None)
            protocol.drop(session_id)

    if state.ui_dir is not None and state.ui_dir.is_dir():
        app.mount("/", StaticFiles(directory=state.ui_dir, html=True), name="ui")

    return app


def serve(state: AppState, host: str = "127.0.0.1", port: int = 8000) -> None:
    """Run the service until interrupted (uvicorn handles signals)."""
    import uvicorn

    uvicorn.run(create_app(state), host=host, port=port, log_level="info")
