"""Message-channel payloads: strict schemas and canonical serialization.

Every message is one JSON object with a ``kind`` plus the fields of that
kind — nothing optional, nothing extra. Encoding is canonical (sorted keys,
compact separators) so identical payloads are identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Callable, Mapping

KINDS = ("hello", "select", "highlight", "content", "error", "arrangement", "refresh", "ack")


class WireError(Exception):
    def __init__(self, code: str, message: str):
        self.code = code
        self.message = message
        super().__init__(f"{code}: {message}")


@dataclass(frozen=True)
class WireMessage:
    kind: str
    payload: Mapping[str, Any]


def _is_str(v: Any) -> bool:
    return isinstance(v, str)


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_str_list(v: Any) -> bool:
    return isinstance(v, list) and all(isinstance(x, str) for x in v)


def _is_origin(v: Any) -> bool:
    return (
        isinstance(v, dict)
        and set(v) == {"view_id", "element_key"}
        and _is_str(v["view_id"])
        and _is_str(v["element_key"])
    )


def _is_highlight_map(v: Any) -> bool:
    return isinstance(v, dict) and all(_is_str(k) and _is_str_list(keys) for k, keys in v.items())


def _is_document(v: Any) -> bool:
    return (
        isinstance(v, dict)
        and set(v) == {"view_id", "graph_version", "elements"}
        and _is_str(v["view_id"])
        and _is_int(v["graph_version"])
        and isinstance(v["elements"], list)
    )


_FIELDS: dict[str, dict[str, Callable[[Any], bool]]] = {
    "hello": {"role": _is_str, "arrangement": _is_str_list},
    "select": {"view_id": _is_str, "element_key": _is_str, "graph_version": _is_int},
    "arrangement": {"arrangement": _is_str_list},
    "refresh": {"graph_version": _is_int},
    "highlight": {"origin": _is_origin, "highlights": _is_highlight_map, "graph_version": _is_int},
    "content": {"view_id": _is_str, "document": _is_document, "graph_version": _is_int},
    "error": {"code": _is_str, "message": _is_str},
    "ack": {"graph_version": _is_int},
}


def decode(text: str) -> WireMessage:
    """Parse and strictly validate one inbound message."""
    try:
        data = json.loads(text)
    except ValueError:
        raise WireError("bad_payload", "message is not valid JSON") from None
    if not isinstance(data, dict):
        raise WireError("bad_payload", "message must be a JSON object")
    kind = data.get("kind")
    if kind not in _FIELDS:
        raise WireError("unknown_kind", f"unknown message kind {kind!r}")
    fields = _FIELDS[kind]
    payload = {k: v for k, v in data.items() if k != "kind"}
    for name in payload:
        if name not in fields:
            raise WireError("unknown_field", f"{kind} message has no field {name!r}")
    for name, check in fields.items():
        if name not in payload:
            raise WireError("missing_field", f"{kind} message requires field {name!r}")
        if not check(payload[name]):
            raise WireError("bad_field", f"{kind} message field {name!r} has the wrong shape")
    return WireMessage(kind, payload)


def encode(kind: str, **payload: Any) -> str:
    """Canonical JSON text for one outbound message."""
    if kind not in _FIELDS:
        raise ValueError(f"unknown message kind {kind!r}")
    missing = set(_FIELDS[kind]) - set(payload)
    extra = set(payload) - set(_FIELDS[kind])
    if missing or extra:
        raise ValueError(f"{kind} payload mismatch: missing {sorted(missing)}, extra {sorted(extra)}")
    body = {"kind": kind, **payload}
    return json.dumps(body, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
