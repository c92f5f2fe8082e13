"""HTTP front end for a :class:`~adme.madme.Manager`.

Five methods::

    GET  /resources     Deladas resource text
    GET  /constraints   Deladas constraintset text
    GET  /deployment    DDD XML, 404 before the first enactment
    POST /satisfy       {"constraints", "resources", "config", "maxSolutions"}
    POST /enact         {"ddd"}

Requests are serialized with a lock, so handlers see the manager one at a
time even though the server is threaded.
"""
from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .madme import EnactError, GoalError, Manager, NoDeployment
from .model import DddParseError

__all__ = ["make_server", "ManagerServer"]


class ManagerServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, manager: Manager):
        self.manager = manager
        self.lock = threading.Lock()
        super().__init__(address, _Handler)


class _BadRequest(Exception):
    pass


class _Handler(BaseHTTPRequestHandler):
    server: ManagerServer
    protocol_version = "HTTP/1.1"

    def log_message(self, format, *args):  # noqa: A002 - keep the test output quiet
        pass

    def _send(self, code: int, body: bytes, ctype: str):
        self.send_response(code)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _json(self, code: int, obj):
        self._send(code, json.dumps(obj, sort_keys=True).encode("utf-8"), "application/json")

    def _text(self, code: int, text: str):
        self._send(code, text.encode("utf-8"), "text/plain; charset=utf-8")

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length)
        try:
            obj = json.loads(raw or b"{}")
        except json.JSONDecodeError as exc:
            raise _BadRequest(f"invalid JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise _BadRequest("request body must be a JSON object")
        return obj

    def do_GET(self):
        m = self.server.manager
        with self.server.lock:
            if self.path == "/resources":
                return self._text(200, m.get_resources())
            if self.path == "/constraints":
                return self._text(200, m.get_constraints())
            if self.path == "/deployment":
                try:
                    return self._send(200, m.get_deployment(), "application/xml")
                except NoDeployment as exc:
                    return self._json(404, {"error": str(exc)})
        self._json(404, {"error": f"no such resource {self.path}"})

    def do_POST(self):
        try:
            body = self._body()
        except _BadRequest as exc:
            return self._json(400, {"error": str(exc)})
        with self.server.lock:
            if self.path == "/satisfy":
                return self._satisfy(body)
            if self.path == "/enact":
                return self._enact(body)
        self._json(404, {"error": f"no such method {self.path}"})

    def _satisfy(self, body):
        count = body.get("maxSolutions", 1)
        if not isinstance(count, int) or isinstance(count, bool) or count < 1:
            return self._json(400, {"error": "maxSolutions must be a positive integer"})
        for key in ("constraints", "resources", "config"):
            if body.get(key) is not None and not isinstance(body[key], str):
                return self._json(400, {"error": f"{key} must be a string or null"})
        try:
            result = self.server.manager.satisfy(
                body.get("constraints"), body.get("resources"), body.get("config"), count)
        except GoalError as exc:
            return self._json(400, {"error": str(exc)})
        self._json(200, {"status": result.status, "ddds": [d.decode("utf-8") for d in result.ddds]})

    def _enact(self, body):
        ddd = body.get("ddd")
        if not isinstance(ddd, str):
            return self._json(400, {"error": "ddd must be an XML string"})
        m = self.server.manager
        try:
            report = m.enact(ddd)
        except DddParseError as exc:
            return self._json(400, {"error": str(exc)})
        except EnactError as exc:
            actions = exc.report.to_json() if exc.report else []
            return self._json(409, {"error": str(exc), "actions": actions, "status": m.phase})
        self._json(200, {"actions": report.to_json(), "status": report.status})


def make_server(manager: Manager, host: str = "127.0.0.1", port: int = 0) -> ManagerServer:
    """Bind (port 0 picks a free port); call ``serve_forever`` to run."""
    return ManagerServer((host, port), manager)
