"""Client for an off-site detection service (the edge-cloud deployment).

Wire contract: ``POST {base}/detect`` with
``{"frame", "width", "height", "pixels_b64"}``; a 200 response carries
``{"detections": [{"x","y","w","h","confidence","class"}, ...]}``.
"""

from __future__ import annotations

import base64
import json
import logging
import threading
import time
from typing import List, Optional

import requests

from ..core import Detection, Frame
from .base import BackendUnavailable, Capability, DetectorBackend, SchemaError, clip_detections

log = logging.getLogger(__name__)


class RemoteTimeout(BackendUnavailable):
    pass


class HttpError(BackendUnavailable):
    def __init__(self, status: int, cause=None):
        super().__init__(f"detection service answered HTTP {status}", cause)
        self.status = status


def encode_request(frame: Frame) -> dict:
    return {
        "frame": frame.index,
        "width": frame.width,
        "height": frame.height,
        "pixels_b64": base64.b64encode(frame.pixels.tobytes()).decode("ascii"),
    }


def parse_response(body) -> List[Detection]:
    try:
        obj = json.loads(body)
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"response is not JSON: {exc}") from exc
    if not isinstance(obj, dict) or not isinstance(obj.get("detections"), list):
        raise SchemaError("response lacks a 'detections' list")
    try:
        return [Detection.from_dict(d) for d in obj["detections"]]
    except (KeyError, ValueError, TypeError) as exc:
        raise SchemaError(f"malformed detection: {exc}") from exc


def remote_detect(
    frame: Frame,
    endpoint: str,
    timeout_ms: float,
    session: Optional[requests.Session] = None,
) -> List[Detection]:
    """One request, no retries. Every failure surfaces as :class:`BackendUnavailable`."""
    url = endpoint.rstrip("/") + "/detect"
    post = (session or requests).post
    try:
        resp = post(url, json=encode_request(frame), timeout=timeout_ms / 1000.0)
    except requests.Timeout as exc:
        raise RemoteTimeout(f"no answer from {url} within {timeout_ms} ms", exc) from exc
    except requests.RequestException as exc:
        raise BackendUnavailable(f"request to {url} failed: {exc}", exc) from exc
    if resp.status_code != 200:
        raise HttpError(resp.status_code)
    try:
        dets = parse_response(resp.content)
    except SchemaError as exc:
        raise BackendUnavailable(str(exc), exc) from exc
    return clip_detections(dets, frame.width, frame.height)


class RemoteBackend(DetectorBackend):
    """Retries a failed request ``retries`` times with exponential backoff.

    Safe to call from several threads; each thread gets its own HTTP session.
    """

    def __init__(
        self,
        endpoint: str,
        timeout_ms: float = 2000,
        max_inflight: int = 4,
        retries: int = 2,
        backoff_ms: float = 100,
    ):
        self.endpoint = endpoint
        self.timeout_ms = timeout_ms
        self.max_inflight = max_inflight
        self.retries = retries
        self.backoff_ms = backoff_ms
        self.capability = Capability("remote", False)
        self.latencies_us: List[int] = []
        self._local = threading.local()
        self._lock = threading.Lock()

    def _session(self) -> requests.Session:
        s = getattr(self._local, "session", None)
        if s is None:
            s = self._local.session = requests.Session()
        return s

    def detect(self, frame: Frame) -> List[Detection]:
        attempt = 0
        while True:
            t0 = time.perf_counter()
            try:
                dets = remote_detect(frame, self.endpoint, self.timeout_ms, self._session())
            except BackendUnavailable as exc:
                if attempt >= self.retries:
                    raise
                delay = self.backoff_ms * (2**attempt) / 1000.0
                log.debug("frame %d: %s; retrying in %.2fs", frame.index, exc, delay)
                attempt += 1
                time.sleep(delay)
                continue
            with self._lock:
                self.latencies_us.append(int((time.perf_counter() - t0) * 1e6))
            return dets
