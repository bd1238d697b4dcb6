"""Minimal HTTP match service: POST /match/<piece-id> with a BSCR body."""
from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Mapping

from . import bootleg as bs
from .config import HyperParams
from .errors import CorruptFeatureError, InvalidArgumentError, SheetMidiError
from .midi import MidiBootleg
from .pipeline import match_features

log = logging.getLogger(__name__)

MAX_BODY = 1 << 20


def match_response(result) -> dict:
    return {
        "start_sec": result.interval.start,
        "end_sec": result.interval.end,
        "cost": result.total_cost,
        "ref_start_col": result.ref_start_col,
        "ref_end_col": result.ref_end_col,
    }


class MatchHandler(BaseHTTPRequestHandler):
    server: "MatchServer"
    protocol_version = "HTTP/1.1"

    def _send(self, status: int, payload: dict):
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path.rstrip("/") == "/pieces":
            self._send(200, {"pieces": sorted(self.server.registry)})
        else:
            self._send(404, {"error": "not found"})

    def do_POST(self):
        parts = self.path.strip("/").split("/")
        try:
            length = int(self.headers.get("Content-Length") or 0)
        except ValueError:
            self._send(400, {"error": "bad Content-Length"})
            return
        if length > MAX_BODY:
            self._send(413, {"error": "body too large"})
            return
        body = self.rfile.read(length)
        if len(parts) != 2 or parts[0] != "match":
            self._send(404, {"error": "not found"})
            return
        midi = self.server.registry.get(parts[1])
        if midi is None:
            self._send(404, {"error": f"unknown piece {parts[1]!r}"})
            return
        try:
            query = bs.deserialize(body)
            if query.width == 0:
                raise InvalidArgumentError("query has no columns")
            result = match_features(query, midi, self.server.params)
        except (CorruptFeatureError, InvalidArgumentError) as exc:
            self._send(400, {"error": str(exc)})
            return
        self._send(200, match_response(result))

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)


class MatchServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, registry: Mapping[str, MidiBootleg], params: HyperParams = HyperParams()):
        if not registry:
            raise InvalidArgumentError("piece registry is empty")
        self.registry = dict(registry)
        self.params = params
        try:
            super().__init__(address, MatchHandler)
        except OSError as exc:
            raise SheetMidiError(f"cannot listen on {address[0]}:{address[1]}: {exc}") from exc


def start_background(registry: Mapping[str, MidiBootleg], port: int = 0, host: str = "127.0.0.1",
                     params: HyperParams = HyperParams()) -> MatchServer:
    """Start a server on a daemon thread; call ``shutdown()`` to stop it."""
    server = MatchServer((host, port), registry, params)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    return server


def serve(port: int, registry: Mapping[str, MidiBootleg], host: str = "127.0.0.1",
          params: HyperParams = HyperParams()):
    server = MatchServer((host, port), registry, params)
    log.info("serving %d pieces on %s:%d", len(server.registry), host, server.server_address[1])
    try:
        server.serve_forever()
    finally:
        server.server_close()
