"""HTTP surface: traffic snapshots, block control, device labels, static UI.

Stdlib-only server. Handlers run on the ThreadingHTTPServer's worker threads
and touch shared state only through snapshot reads and the policy store's
locked mutations, so they never block the capture loop.

Routes:
    GET    /get_traffic                                   traffic snapshot
    GET    /block/{device_id}/{block_time}/{unblock_time} one-shot block rule
    GET    /devices                                       registry listing
    GET    /rules                                         rule listing
    POST   /rules                                         recurring rule
    DELETE /rules/{rule_id}                               cancel a rule
    GET    /device_info/{device_id}                       privacy catalog entry
    GET    /ui, /ui/*                                     static dashboard files

Errors are JSON {code, message} with code in {not_found, bad_request,
conflict}; an unexpected handler crash maps to HTTP 500 with a bad_request
body as a last resort (the status line, not the code, is authoritative there).
"""

from __future__ import annotations

import json
import logging
import mimetypes
import re
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable, Optional
from urllib.parse import urlsplit

from .analyzer import CounterStore, snapshot
from .discovery import DeviceRegistry
from .policy import BlockRule, PolicyError, PolicyStore, is_active
from .privacy import PrivacyCatalogEntry, device_info, load_catalog

log = logging.getLogger(__name__)

DEFAULT_LISTEN = "127.0.0.1:8089"

_STATUS = {"not_found": 404, "bad_request": 400, "conflict": 409}


class ApiError(Exception):
    def __init__(self, code: str, message: str):
        assert code in _STATUS
        super().__init__(message)
        self.code = code
        self.message = message


@dataclass
class ApiContext:
    """Everything a handler may touch; clock is the backend's, not the wall's."""
    registry: DeviceRegistry
    policy: PolicyStore
    store: CounterStore
    clock: Callable[[], float]
    ui_dir: Optional[Path] = None
    cors_origin: Optional[str] = None
    catalog: dict = field(default_factory=load_catalog)


def _parse_epoch(raw: str, what: str) -> int:
    if not raw.isdigit():
        raise ApiError("bad_request", f"{what} must be an unsigned integer, got {raw!r}")
    return int(raw)


# ------------------------------------------------------------------ handlers

def _get_traffic(ctx: ApiContext, m: re.Match, body) -> dict:
    return snapshot(ctx.store, ctx.registry, ctx.policy, ctx.clock()).to_wire()


def _block(ctx: ApiContext, m: re.Match, body) -> dict:
    block_at = _parse_epoch(m["t0"], "block_time")
    unblock_at = _parse_epoch(m["t1"], "unblock_time")
    rule_id = ctx.policy.add_rule(m["device_id"], block_at, unblock_at,
                                  now=ctx.clock())
    return {"rule_id": rule_id}


def _devices(ctx: ApiContext, m: re.Match, body) -> dict:
    blocked = ctx.policy.blocked_set(ctx.clock())
    gw = ctx.registry.gateway()
    return {
        "devices": [
            {
                "device_id": r.device_id,
                "name": r.name,
                "vendor": r.vendor,
                "mac": str(r.mac),
                "ip": str(r.ip),
                "blocked": r.device_id in blocked,
            }
            for r in ctx.registry.devices()
        ],
        "gateway": None if gw is None else {"mac": str(gw.mac), "ip": str(gw.ip)},
    }


def _rules_list(ctx: ApiContext, m: re.Match, body) -> dict:
    now = ctx.clock()
    out = []
    for rule in ctx.policy.rules():
        entry = {"rule_id": rule.rule_id, "device_id": rule.device,
                 "active": is_active(rule, now)}
        if isinstance(rule, BlockRule):
            entry["kind"] = "window"
            entry["block_at"] = rule.block_at
            entry["unblock_at"] = rule.unblock_at
        else:
            entry["kind"] = "recurring"
            entry["start_hhmm"] = rule.start_hhmm
            entry["end_hhmm"] = rule.end_hhmm
        out.append(entry)
    return {"rules": out}


def _rules_create(ctx: ApiContext, m: re.Match, body) -> dict:
    if not isinstance(body, dict):
        raise ApiError("bad_request", "JSON object body required")
    try:
        device_id = body["device_id"]
        start = body["start_hhmm"]
        end = body["end_hhmm"]
    except KeyError as exc:
        raise ApiError("bad_request", f"missing field {exc.args[0]}")
    if not all(isinstance(v, str) for v in (device_id, start, end)):
        raise ApiError("bad_request", "device_id, start_hhmm, end_hhmm must be strings")
    rule_id = ctx.policy.add_recurring(device_id, start, end, now=ctx.clock())
    return {"rule_id": rule_id}


def _rules_delete(ctx: ApiContext, m: re.Match, body) -> dict:
    ctx.policy.cancel_rule(m["rule_id"])
    return {"rule_id": m["rule_id"], "cancelled": True}


def _device_info(ctx: ApiContext, m: re.Match, body) -> dict:
    record = ctx.registry.get(m["device_id"])
    if record is None:
        raise ApiError("not_found", f"no device {m['device_id']}")
    return device_info(record.device_id, record.name, ctx.catalog)


_ROUTES = [
    ("GET", re.compile(r"/get_traffic"), _get_traffic),
    ("GET", re.compile(r"/block/(?P<device_id>[^/]+)/(?P<t0>[^/]+)/(?P<t1>[^/]+)"), _block),
    ("GET", re.compile(r"/devices"), _devices),
    ("GET", re.compile(r"/rules"), _rules_list),
    ("POST", re.compile(r"/rules"), _rules_create),
    ("DELETE", re.compile(r"/rules/(?P<rule_id>[^/]+)"), _rules_delete),
    ("GET", re.compile(r"/device_info/(?P<device_id>[^/]+)"), _device_info),
]


class _Handler(BaseHTTPRequestHandler):
    ctx: ApiContext  # bound by make_server
    protocol_version = "HTTP/1.1"
    server_version = "leakscope"

    def log_message(self, fmt, *args):
        log.debug("%s %s", self.address_string(), fmt % args)

    # ---- plumbing

    def _cors(self):
        if self.ctx.cors_origin:
            self.send_header("Access-Control-Allow-Origin", self.ctx.cors_origin)
            self.send_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def _send_json(self, status: int, payload: dict):
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self._cors()
        self.end_headers()
        self.wfile.write(data)

    def _read_body(self):
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return None
        raw = self.rfile.read(length)
        try:
            return json.loads(raw)
        except ValueError:
            raise ApiError("bad_request", "body is not valid JSON")

    def _dispatch(self, method: str):
        path = urlsplit(self.path).path
        try:
            if method == "GET" and (path == "/ui" or path.startswith("/ui/")):
                return self._serve_static(path)
            for route_method, pattern, handler in _ROUTES:
                if route_method != method:
                    continue
                m = pattern.fullmatch(path)
                if m:
                    return self._send_json(200, handler(self.ctx, m, self._read_body()))
            raise ApiError("not_found", f"no route for {method} {path}")
        except ApiError as exc:
            self._send_json(_STATUS[exc.code], {"code": exc.code, "message": exc.message})
        except PolicyError as exc:
            self._send_json(_STATUS[exc.code], {"code": exc.code, "message": str(exc)})
        except Exception:
            log.exception("handler crash on %s %s", method, path)
            self._send_json(500, {"code": "bad_request", "message": "internal server error"})

    def _serve_static(self, path: str):
        if self.ctx.ui_dir is None:
            raise ApiError("not_found", "no UI directory configured")
        root = Path(self.ctx.ui_dir).resolve()
        rel = path[len("/ui"):].lstrip("/") or "index.html"
        target = (root / rel).resolve()
        if root not in target.parents and target != root:
            raise ApiError("not_found", "no such file")
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            raise ApiError("not_found", f"no such file: {rel}")
        data = target.read_bytes()
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self._cors()
        self.end_headers()
        self.wfile.write(data)

    # ---- verbs

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_DELETE(self):
        self._dispatch("DELETE")

    def do_OPTIONS(self):
        self.send_response(204)
        self._cors()
        self.send_header("Content-Length", "0")
        self.end_headers()


def parse_listen(listen: str) -> tuple[str, int]:
    host, sep, port = listen.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"--listen wants host:port, got {listen!r}")
    return host or "127.0.0.1", int(port)


def make_server(ctx: ApiContext, listen: str = DEFAULT_LISTEN) -> ThreadingHTTPServer:
    host, port = parse_listen(listen)
    handler = type("BoundHandler", (_Handler,), {"ctx": ctx})
    server = ThreadingHTTPServer((host, port), handler)
    server.daemon_threads = True
    return server


def serve_background(ctx: ApiContext, listen: str = DEFAULT_LISTEN):
    """Start the API on a daemon thread; returns (server, base_url)."""
    server = make_server(ctx, listen)
    # short poll so shutdown() returns promptly
    thread = threading.Thread(target=lambda: server.serve_forever(poll_interval=0.05),
                              name="leakscope-api", daemon=True)
    thread.start()
    host, port = server.server_address[:2]
    return server, f"http://{host}:{port}"
