"""Read-only JSON-over-HTTP facade for the query operations."""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Callable
from urllib.parse import urlsplit

from .errors import AmbiguityError, DomainError, NotFoundError, RegKGError, error_payload
from .graph import PropertyGraph
from .query import (
    compute_stats,
    intersect_documents,
    serialize,
    shortest_paths,
    table_of_contents,
    tag_usage,
)
from .taxonomy import TagType

log = logging.getLogger(__name__)


def _get(params: dict, name: str, kind: type | tuple, default: Any = ..., check=None):
    if name not in params or params[name] is None:
        if default is ...:
            raise DomainError(f"missing required parameter {name!r}")
        return default
    value = params[name]
    kinds = kind if isinstance(kind, tuple) else (kind,)
    if isinstance(value, bool) and bool not in kinds or not isinstance(value, kinds):
        names = "/".join(k.__name__ for k in kinds)
        raise DomainError(f"parameter {name!r} must be {names}, got {type(value).__name__}")
    if check is not None and not check(value):
        raise DomainError(f"parameter {name!r} out of range: {value!r}")
    return value


def _str_list(value, name: str) -> list[str]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise DomainError(f"parameter {name!r} must be a list of strings")
    return value


def op_intersect(graph: PropertyGraph, p: dict) -> dict:
    results = intersect_documents(
        graph,
        TagType.parse(_get(p, "ttype", str)),
        _get(p, "left", str),
        _get(p, "right", str),
        _get(p, "limit", int, None, lambda v: v >= 0),
    )
    return {"results": [r.to_dict() for r in results]}


def op_toc(graph: PropertyGraph, p: dict) -> dict:
    toc = table_of_contents(graph, _get(p, "title", str), _get(p, "max_plevel", int, 0, lambda v: v >= 0))
    return {"toc": [e.to_dict() for e in toc]}


def op_usage(graph: PropertyGraph, p: dict) -> dict:
    ttype = p.get("ttype")
    if isinstance(ttype, list):
        ttype = [TagType.parse(t) for t in _str_list(ttype, "ttype")]
    elif ttype is not None:
        ttype = TagType.parse(_get(p, "ttype", str))
    if "lemma" in p and "lemma_contains" in p:
        raise DomainError("give either 'lemma' or 'lemma_contains', not both")
    if "lemma_contains" in p:
        predicate = _str_list(p["lemma_contains"], "lemma_contains")
    else:
        predicate = _get(p, "lemma", str)
    return {"results": [r.to_dict() for r in tag_usage(graph, ttype, predicate)]}


def op_paths(graph: PropertyGraph, p: dict) -> dict:
    results = shortest_paths(
        graph,
        _get(p, "src_contains", str),
        _get(p, "dst_contains", str),
        _get(p, "max_len", int, 4, lambda v: v >= 1),
        _get(p, "limit", int, None, lambda v: v >= 0),
    )
    return {"results": [r.to_dict() for r in results]}


def op_stats(graph: PropertyGraph, p: dict) -> dict:
    return compute_stats(graph, TagType.parse(_get(p, "ttype", str, "PROD"))).to_dict()


OPERATIONS: dict[str, Callable[[PropertyGraph, dict], dict]] = {
    "intersect": op_intersect,
    "toc": op_toc,
    "usage": op_usage,
    "paths": op_paths,
    "stats": op_stats,
}


def run_operation(graph: PropertyGraph, name: str, params: dict) -> bytes:
    """Serialized result of one operation, as served over HTTP."""
    return serialize(OPERATIONS[name](graph, params))


def _status_for(exc: RegKGError) -> int:
    if isinstance(exc, NotFoundError):
        return 404
    if isinstance(exc, AmbiguityError):
        return 409
    return 400


def handle_request(graph: PropertyGraph, method: str, path: str, body: bytes = b"") -> tuple[int, bytes]:
    """Route one request; pure function of the snapshot and the request."""
    route = urlsplit(path).path.rstrip("/")
    if route.startswith("/v1/"):
        route = route[3:]
    name = route.lstrip("/")
    if name not in OPERATIONS:
        return 404, serialize({"error": {"code": "not_found", "message": f"no endpoint {path!r}",
                                         "type": "NotFoundError"}})
    allowed = ("GET", "POST") if name == "stats" else ("POST",)
    if method not in allowed:
        return 405, serialize({"error": {"code": "method_not_allowed",
                                         "message": f"{method} not allowed on /v1/{name}; use {'/'.join(allowed)}",
                                         "type": "MethodNotAllowed"}})
    try:
        params = json.loads(body.decode("utf-8")) if body.strip() else {}
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        return 400, serialize({"error": {"code": "bad_request", "message": f"invalid JSON body: {exc}",
                                         "type": "BadRequest"}})
    if not isinstance(params, dict):
        return 400, serialize({"error": {"code": "bad_request", "message": "request body must be a JSON object",
                                         "type": "BadRequest"}})
    try:
        return 200, run_operation(graph, name, params)
    except RegKGError as exc:
        return _status_for(exc), serialize(error_payload(exc))
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error on %s", name)
        return 500, serialize({"error": {"code": "internal_error", "message": str(exc),
                                         "type": type(exc).__name__}})


class Snapshot:
    """Holder for the graph being served; replace() swaps it atomically."""

    def __init__(self, graph: PropertyGraph) -> None:
        self._lock = threading.Lock()
        self._graph = graph

    def get(self) -> PropertyGraph:
        with self._lock:
            return self._graph

    def replace(self, graph: PropertyGraph) -> None:
        with self._lock:
            self._graph = graph


def make_server(snapshot: Snapshot, host: str = "127.0.0.1", port: int = 8000) -> ThreadingHTTPServer:
    class Handler(BaseHTTPRequestHandler):
        server_version = "regkg/1"

        def _respond(self, method: str) -> None:
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length) if length else b""
            status, payload = handle_request(snapshot.get(), method, self.path, body)
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def do_GET(self) -> None:  # noqa: N802
            self._respond("GET")

        def do_POST(self) -> None:  # noqa: N802
            self._respond("POST")

        def log_message(self, fmt: str, *args) -> None:
            log.info("%s " + fmt, self.address_string(), *args)

    server = ThreadingHTTPServer((host, port), Handler)
    server.daemon_threads = True
    return server


def serve(graph: PropertyGraph, port: int = 8000, host: str = "127.0.0.1") -> None:
    server = make_server(Snapshot(graph), host, port)
    log.info("serving on http://%s:%d/v1/", host, server.server_address[1])
    try:
        server.serve_forever()
    finally:
        server.server_close()
