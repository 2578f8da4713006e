"""Tiny HTTP text-encoder endpoint.

Speaks the live-encoder protocol the trainer's query path expects:
``POST /encode`` with ``{"text": ...}`` answers ``{"vector": [...]}``.
Stdlib-only so the preprocessing side stays free of web frameworks.
"""

from __future__ import annotations

import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .text_encoder import DEFAULT_DIM, encode_text


def make_encoder_server(port: int = 0, dim: int = DEFAULT_DIM,
                        host: str = "127.0.0.1") -> ThreadingHTTPServer:
    """Bound but not yet serving; port 0 picks a free one (server.server_port)."""

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            if self.path != "/encode":
                return self._reply(404, {"error": "unknown path"})
            try:
                length = int(self.headers.get("Content-Length", "0"))
                payload = json.loads(self.rfile.read(length))
                text = payload["text"]
                vector = encode_text(text, dim)
            except (ValueError, KeyError, TypeError) as exc:
                return self._reply(400, {"error": str(exc)})
            self._reply(200, {"vector": vector.tolist()})

        def _reply(self, status: int, body: dict):
            data = json.dumps(body).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, *args):
            pass

    return ThreadingHTTPServer((host, port), Handler)
