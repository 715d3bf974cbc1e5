"""Embedded HTTP service for the workbench UI and scripts.

Plain-stdlib threading server. All store mutations serialize behind one
lock (sessions are single-writer); reads return snapshots of the current
version. POST bodies may carry a ``request_token``; retries with the same
token replay the stored response instead of re-applying the mutation.
"""

from __future__ import annotations

import json
import mimetypes
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .decisions import decide_from_probability, element_weight_above, over_commit_cost
from .errors import (
    CapExceeded,
    DocumentError,
    InvalidAction,
    SparecastError,
    StaleEdit,
    UnknownHotspot,
    UnknownNode,
    UnknownSession,
    UnknownTarget,
)
from .report import build_report, render_json
from .revision import Edit, SessionStore
from .scenarios import exceedance

_STATUS_FOR = (
    (StaleEdit, 409, "stale_edit"),
    (UnknownSession, 404, "unknown_session"),
    (UnknownNode, 404, "unknown_node"),
    (UnknownTarget, 404, "unknown_target"),
    (UnknownHotspot, 404, "unknown_hotspot"),
    (CapExceeded, 400, "cap_exceeded"),
    (InvalidAction, 400, "invalid_action"),
    (DocumentError, 400, "invalid_document"),
    (SparecastError, 400, "engine_error"),
)


class EngineService:
    """Route handling decoupled from the HTTP plumbing for testability."""

    def __init__(self, store: SessionStore, default_session: str, assets_dir: str | None = None):
        self.store = store
        self.default_session = default_session
        self.assets_dir = Path(assets_dir) if assets_dir else None
        self.lock = threading.RLock()
        self._token_replies: dict[tuple[str, str], tuple[int, dict]] = {}

    # -- helpers ---------------------------------------------------------

    def _session_id(self, query: dict, body: dict | None = None) -> str:
        if body and body.get("session"):
            return body["session"]
        return query.get("session", [self.default_session])[0]

    def _json_error(self, exc: Exception) -> tuple[int, dict]:
        for klass, status, code in _STATUS_FOR:
            if isinstance(exc, klass):
                payload = {"code": code, "message": str(exc)}
                node_id = getattr(exc, "node_id", None)
                if node_id:
                    payload["node_id"] = node_id
                return status, payload
        raise exc

    def _tree_payload(self, session_id: str) -> dict:
        session = self.store.get(session_id)
        hotspots = self.store.detect_hotspots(session_id)
        report = build_report(session, hotspots)
        children: dict[str, list[str]] = {nid: [] for nid in session.doc.tree.nodes}
        for nid, node in session.doc.tree.nodes.items():
            if node.parent is not None:
                children[node.parent].append(nid)
        for entry in report["nodes"]:
            entry["children"] = children[entry["id"]]
        return {
            "session": session.id,
            "version": session.version,
            "root": session.doc.tree.root_id,
            "nodes": report["nodes"],
        }

    def _sensitivity_payload(self, session_id: str, node_id: str) -> dict:
        session = self.store.get(session_id)
        result = session.result
        if node_id not in session.doc.tree.nodes:
            raise UnknownNode(f"no such node: {node_id}")
        rates = result.node_rates[node_id]
        rule = session.doc.cost_model.rule
        cm = session.doc.cost_model
        plan = result.plans.get(node_id)
        if rates.distribution is not None:
            p = exceedance(rates.distribution, rule.threshold)
        elif rates.cluster and not rates.too_many:
            p = element_weight_above(rates.point, rule.threshold)
        else:
            p = None
        over = over_commit_cost(rule, result.rollups[node_id].cost, cm)
        p_eff = 0.5 if p is None else p
        return {
            "session": session.id,
            "version": session.version,
            "node": node_id,
            "uncertain": rates.uncertain_count > 0,
            "too_many_modes": rates.too_many,
            "driving_modes": list(rates.driving_modes),
            "threshold": rule.threshold,
            "break_even": rule.break_even,
            "margin": rule.margin,
            "p": p,
            "decision": plan.decision if plan else None,
            "decision_under_max": decide_from_probability(
                element_weight_above(rates.bounds.max_scenario, rule.threshold), rule
            ).value,
            "decision_under_min": decide_from_probability(
                element_weight_above(rates.bounds.min_scenario, rule.threshold), rule
            ).value,
            "swing_cents": over * min(p_eff, 1.0 - p_eff),
        }

    # -- route handlers --------------------------------------------------

    def handle_get(self, path: str, query: dict) -> tuple[int, dict | bytes, str]:
        if path == "/api/tree":
            return 200, self._tree_payload(self._session_id(query)), "application/json"
        if path == "/api/hotspots":
            sid = self._session_id(query)
            session = self.store.get(sid)
            hotspots = self.store.detect_hotspots(sid)
            return (
                200,
                {
                    "session": sid,
                    "version": session.version,
                    "hotspots": [
                        {
                            "id": h.id,
                            "kind": h.kind,
                            "node": h.node_id,
                            "driving_modes": list(h.driving_modes),
                            "affected": list(h.affected),
                            "frontier": h.frontier,
                            "swing_cents": h.swing_cents,
                            "p": h.p,
                        }
                        for h in hotspots
                    ],
                },
                "application/json",
            )
        if path == "/api/report":
            sid = self._session_id(query)
            session = self.store.get(sid)
            report = build_report(session, self.store.detect_hotspots(sid))
            return 200, report, "application/json"
        match = re.fullmatch(r"/api/nodes/([^/]+)/explain", path)
        if match:
            sid = self._session_id(query)
            session = self.store.get(sid)
            explain = self.store.explain(sid, match.group(1))
            def record(j):
                return {
                    "id": j.id,
                    "stage": j.stage,
                    "rule": j.rule,
                    "decision": j.decision,
                    "facts": j.facts,
                    "origin": j.origin,
                    "version": j.version,
                    "superseded_by": j.superseded_by,
                }
            return (
                200,
                {
                    "session": sid,
                    "version": session.version,
                    "node": explain.node_id,
                    "empty_history": explain.empty_history,
                    "active": [record(j) for j in explain.active],
                    "history": [record(j) for j in explain.history],
                },
                "application/json",
            )
        match = re.fullmatch(r"/api/nodes/([^/]+)/sensitivity", path)
        if match:
            return 200, self._sensitivity_payload(self._session_id(query), match.group(1)), "application/json"
        return self._static(path)

    def handle_post(self, path: str, query: dict, body: dict) -> tuple[int, dict, str]:
        token = body.get("request_token")
        sid = self._session_id(query, body)
        if token:
            cached = self._token_replies.get((sid, token))
            if cached:
                return cached[0], cached[1], "application/json"

        if path == "/api/edits":
            edit = Edit(
                node=body["node"],
                field=body["field"],
                old=body.get("old"),
                new=body.get("new"),
                origin=body.get("origin", "user"),
            )
            session = self.store.apply_edit(sid, edit)
            status, payload = 200, {"session": session.id, "version": session.version}
        else:
            match = re.fullmatch(r"/api/hotspots/([^/]+)/resolve", path)
            if match:
                session = self.store.resolve(
                    sid, match.group(1), body.get("action", ""), body.get("params", {})
                )
                status, payload = 200, {"session": session.id, "version": session.version}
            else:
                match = re.fullmatch(r"/api/sessions/([^/]+)/fork", path)
                if match:
                    child = self.store.fork(match.group(1))
                    status, payload = 201, {"session": child.id, "version": child.version}
                else:
                    return 404, {"code": "not_found", "message": f"no route {path}"}, "application/json"
        if token:
            self._token_replies[(sid, token)] = (status, payload)
        return status, payload, "application/json"

    def _static(self, path: str) -> tuple[int, dict | bytes, str]:
        if self.assets_dir is None or not self.assets_dir.is_dir():
            if path in ("/", "/index.html"):
                return (
                    200,
                    b"<html><body><h1>sparecast engine</h1>"
                    b"<p>No workbench assets bundled; the JSON API lives under /api/.</p>"
                    b"</body></html>",
                    "text/html",
                )
            return 404, {"code": "not_found", "message": f"no route {path}"}, "application/json"
        rel = path.lstrip("/") or "index.html"
        target = (self.assets_dir / rel).resolve()
        if not str(target).startswith(str(self.assets_dir.resolve())) or not target.is_file():
            if path != "/" and not path.startswith("/api/"):
                index = self.assets_dir / "index.html"
                if index.is_file():  # client-side routing falls back to the app shell
                    return 200, index.read_bytes(), "text/html"
            return 404, {"code": "not_found", "message": f"no route {path}"}, "application/json"
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        return 200, target.read_bytes(), ctype

    # -- entry point used by the HTTP handler ----------------------------

    def dispatch(self, method: str, raw_path: str, body_bytes: bytes) -> tuple[int, bytes, str]:
        parsed = urlparse(raw_path)
        query = parse_qs(parsed.query)
        try:
            with self.lock:
                if method == "GET":
                    status, payload, ctype = self.handle_get(parsed.path, query)
                else:
                    try:
                        body = json.loads(body_bytes) if body_bytes else {}
                    except json.JSONDecodeError:
                        return 400, json.dumps({"code": "bad_json", "message": "body is not JSON"}).encode(), "application/json"
                    status, payload, ctype = self.handle_post(parsed.path, query, body)
        except Exception as exc:  # noqa: BLE001 - mapped to API error codes
            status, payload = self._json_error(exc)
            ctype = "application/json"
        if isinstance(payload, bytes):
            return status, payload, ctype
        if path_is_report(parsed.path):
            return status, render_json(payload).encode(), ctype
        return status, (json.dumps(payload) + "\n").encode(), ctype


def path_is_report(path: str) -> bool:
    return path == "/api/report"


class _Handler(BaseHTTPRequestHandler):
    service: EngineService = None  # patched in by make_server

    def _run(self, method: str):
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        status, payload, ctype = self.service.dispatch(method, self.path, body)
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def do_GET(self):  # noqa: N802 - stdlib naming
        self._run("GET")

    def do_POST(self):  # noqa: N802
        self._run("POST")

    def log_message(self, *args):  # quiet by default
        pass


def make_server(service: EngineService, host: str = "127.0.0.1", port: int = 8437) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)
