"""HTTP facade over the label-request broker.

Serves four JSON endpoints on localhost so a browser can label adversaries
while training runs:

- ``GET /api/pending`` — unresolved requests, oldest first;
- ``POST /api/label`` ``{"id": n, "class": k}`` — resolve with a class;
- ``POST /api/decline`` ``{"id": n}`` — push the request down the assumed path;
- ``GET /api/status`` — live training counters.

Resolution codes: 404 unknown id, 400 bad class or malformed body, 409 for
anything already resolved (by a person, a decline, or a timeout).  Any other
path is served from a static directory when one is configured, which is how
the browser console gets delivered.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from . import labeling
from .labeling import LabelBroker

log = logging.getLogger("veritrain.service")

_VERDICT_CODES = {
    labeling.OK: 200,
    labeling.UNKNOWN_ID: 404,
    labeling.BAD_CLASS: 400,
    labeling.ALREADY_RESOLVED: 409,
}

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
}

_FALLBACK_PAGE = (b"<!doctype html><title>labeling service</title>"
                  b"<p>The labeling API is up. Build the browser console "
                  b"(frontend/) to get a UI here; the JSON endpoints live "
                  b"under /api/.</p>")


def default_static_dir() -> Path | None:
    """The browser console's build output, when this is a source checkout."""
    candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return candidate if candidate.is_dir() else None


def _make_handler(broker: LabelBroker, static_dir: Path | None):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            log.debug("%s " + fmt, self.address_string(), *args)

        def _send_json(self, code: int, payload) -> None:
            body = json.dumps(payload).encode()
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _read_body(self):
            try:
                length = int(self.headers.get("Content-Length", 0))
                return json.loads(self.rfile.read(length) or b"{}")
            except (ValueError, json.JSONDecodeError):
                return None

        def do_GET(self):
            path = self.path.split("?", 1)[0]
            if path == "/api/pending":
                self._send_json(200, broker.pending_views())
            elif path == "/api/status":
                self._send_json(200, broker.status_snapshot())
            elif path.startswith("/api/"):
                self._send_json(404, {"error": f"no such endpoint {path}"})
            else:
                self._serve_static(path)

        def do_POST(self):
            path = self.path.split("?", 1)[0]
            if path not in ("/api/label", "/api/decline"):
                self._send_json(404, {"error": f"no such endpoint {path}"})
                return
            body = self._read_body()
            if not isinstance(body, dict) or not isinstance(body.get("id"), int):
                self._send_json(400, {"error": "body must be JSON with an integer id"})
                return
            if path == "/api/label":
                if "class" not in body:
                    self._send_json(400, {"error": "missing class"})
                    return
                verdict = broker.submit_label(body["id"], body["class"])
            else:
                verdict = broker.submit_decline(body["id"])
            code = _VERDICT_CODES[verdict]
            self._send_json(code, {"ok": verdict == labeling.OK,
                                   "verdict": verdict, "id": body["id"]})

        def _serve_static(self, path: str) -> None:
            if static_dir is None:
                self.send_response(200)
                self.send_header("Content-Type", "text/html; charset=utf-8")
                self.send_header("Content-Length", str(len(_FALLBACK_PAGE)))
                self.end_headers()
                self.wfile.write(_FALLBACK_PAGE)
                return
            rel = path.lstrip("/") or "index.html"
            target = (static_dir / rel).resolve()
            root = static_dir.resolve()
            if root not in target.parents and target != root:
                self._send_json(404, {"error": "not found"})
                return
            if target.is_dir():
                target = target / "index.html"
            if not target.is_file():
                self._send_json(404, {"error": "not found"})
                return
            body = target.read_bytes()
            self.send_response(200)
            self.send_header("Content-Type", _CONTENT_TYPES.get(
                target.suffix, "application/octet-stream"))
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

    return Handler


class LabelService:
    """Threaded HTTP server bound to localhost; ``port=0`` picks a free port."""

    def __init__(self, broker: LabelBroker, port: int = 8643,
                 host: str = "127.0.0.1", static_dir=None):
        if static_dir is None:
            static_dir = default_static_dir()
        elif not static_dir:            # explicit False / "": no static files
            static_dir = None
        else:
            static_dir = Path(static_dir)
        self.broker = broker
        self._httpd = ThreadingHTTPServer((host, port),
                                          _make_handler(broker, static_dir))
        self._thread: threading.Thread | None = None
        self.host, self.port = self._httpd.server_address[:2]

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> "LabelService":
        self._thread = threading.Thread(target=self._httpd.serve_forever,
                                        name="label-service", daemon=True)
        self._thread.start()
        log.info("labeling service listening on %s", self.url)
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def __enter__(self) -> "LabelService":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
