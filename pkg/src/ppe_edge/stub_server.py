"""Local stand-in for the off-site detection service, answering from a replay log.

Latency and failure injection let the edge-cloud path be exercised offline.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .detector.replay import ReplayBackend, load_replay

log = logging.getLogger(__name__)


class BindError(OSError):
    pass


class StubDetectorServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, backend: ReplayBackend, port: int = 0, host: str = "127.0.0.1",
                 latency_ms: float = 0.0, fail_rate: float = 0.0, seed: int = 0):
        if not 0.0 <= fail_rate <= 1.0:
            raise ValueError("fail_rate must be in [0, 1]")
        self.backend = backend
        self.latency_ms = latency_ms
        self.fail_rate = fail_rate
        self.requests_served = 0
        self._rng = np.random.default_rng(seed)
        self._lock = threading.Lock()
        try:
            super().__init__((host, port), _Handler)
        except OSError as exc:
            raise BindError(f"cannot bind {host}:{port}: {exc}") from exc

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def should_fail(self) -> bool:
        if self.fail_rate >= 1.0:
            return True
        if self.fail_rate <= 0.0:
            return False
        with self._lock:
            return bool(self._rng.random() < self.fail_rate)

    def start_background(self) -> threading.Thread:
        t = threading.Thread(target=self.serve_forever, name="stub-detector", daemon=True)
        t.start()
        return t


class _Handler(BaseHTTPRequestHandler):
    server: StubDetectorServer

    def log_message(self, fmt, *args):
        log.debug("stub %s - %s", self.address_string(), fmt % args)

    def _reply(self, status: int, body: dict) -> None:
        data = json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length)
        if self.path.rstrip("/") != "/detect":
            self._reply(HTTPStatus.NOT_FOUND, {"error": "unknown path"})
            return
        srv = self.server
        if srv.latency_ms > 0:
            time.sleep(srv.latency_ms / 1000.0)
        if srv.should_fail():
            self._reply(HTTPStatus.SERVICE_UNAVAILABLE, {"error": "injected failure"})
            return
        try:
            req = json.loads(raw)
            index = int(req["frame"])
        except (ValueError, KeyError, TypeError):
            self._reply(HTTPStatus.BAD_REQUEST, {"error": "request needs an integer 'frame'"})
            return
        dets = srv.backend.detections_at(index)
        with srv._lock:
            srv.requests_served += 1
        self._reply(HTTPStatus.OK, {"detections": [d.to_dict() for d in dets]})


def make_stub_server(replay_path: Union[str, Path], port: int = 0, latency_ms: float = 0.0,
                     fail_rate: float = 0.0, host: str = "127.0.0.1", seed: int = 0) -> StubDetectorServer:
    return StubDetectorServer(load_replay(replay_path), port, host, latency_ms, fail_rate, seed)


def serve_stub_detector(replay_path: Union[str, Path], port: int, latency_ms: float = 0.0,
                        fail_rate: float = 0.0, host: str = "127.0.0.1") -> None:
    server = make_stub_server(replay_path, port, latency_ms, fail_rate, host)
    log.info("stub detector listening on %s", server.url)
    try:
        server.serve_forever()
    finally:
        server.server_close()
