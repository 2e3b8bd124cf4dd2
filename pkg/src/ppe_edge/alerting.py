"""Violation and count alerts published to MQTT topics.

Delivery is at-least-once (QoS 1). Subscribers deduplicate on
``(camera_id, track_id, kind, ts_ms)``.
"""

from __future__ import annotations

import enum
import json
import logging
import os
import sys
import threading
from collections import deque
from dataclasses import dataclass
from typing import List, Optional, Tuple
from urllib.parse import urlparse

from .core import BBox

log = logging.getLogger(__name__)

TOPIC_TEMPLATE = "assist/ppe/{camera_id}/{kind}"
DEFAULT_CAPACITY = 10_000


class AlertKind(str, enum.Enum):
    NO_HELMET = "no_helmet"
    COUNT_IN = "count_in"
    COUNT_OUT = "count_out"


class SerializationError(TypeError):
    pass


class SinkDisconnected(ConnectionError):
    pass


@dataclass(frozen=True)
class AlertEvent:
    kind: AlertKind
    camera_id: str
    timestamp: int
    track_id: int
    bbox: BBox

    @property
    def topic(self) -> str:
        return TOPIC_TEMPLATE.format(camera_id=self.camera_id, kind=AlertKind(self.kind).value)

    def to_dict(self) -> dict:
        return {
            "kind": AlertKind(self.kind).value,
            "camera_id": self.camera_id,
            "ts_ms": int(self.timestamp),
            "track_id": int(self.track_id),
            "bbox": self.bbox.to_dict(),
        }

    def payload(self) -> bytes:
        try:
            return json.dumps(self.to_dict(), separators=(",", ":"), allow_nan=False).encode()
        except (TypeError, ValueError, AttributeError) as exc:
            raise SerializationError(f"cannot serialize alert {self!r}") from exc

    @classmethod
    def from_payload(cls, payload: bytes) -> "AlertEvent":
        d = json.loads(payload)
        return cls(AlertKind(d["kind"]), d["camera_id"], int(d["ts_ms"]), int(d["track_id"]), BBox.from_dict(d["bbox"]))


class InMemorySink:
    """Captures messages; flip ``connected`` to simulate a broker outage."""

    def __init__(self):
        self.messages: List[Tuple[str, bytes, int]] = []
        self.connected = True
        self._lock = threading.Lock()

    def send(self, topic: str, payload: bytes, qos: int = 1) -> None:
        if not self.connected:
            raise SinkDisconnected("in-memory broker is down")
        with self._lock:
            self.messages.append((topic, payload, qos))

    @property
    def events(self) -> List[AlertEvent]:
        return [AlertEvent.from_payload(p) for _, p, _ in self.messages]

    @property
    def topics(self) -> List[str]:
        return [t for t, _, _ in self.messages]


def in_memory_sink() -> InMemorySink:
    return InMemorySink()


class StdoutSink:
    connected = True

    def __init__(self, stream=None):
        self.stream = stream or sys.stdout

    def send(self, topic: str, payload: bytes, qos: int = 1) -> None:
        self.stream.write(f"{topic} {payload.decode()}\n")


class MqttSink:
    """paho-mqtt backed sink; credentials default to MQTT_USER / MQTT_PASS."""

    def __init__(self, url: Optional[str] = None, username: Optional[str] = None, password: Optional[str] = None, client=None):
        url = url or os.environ.get("MQTT_URL", "mqtt://localhost:1883")
        parsed = urlparse(url if "://" in url else f"mqtt://{url}")
        self.host = parsed.hostname or "localhost"
        self.port = parsed.port or 1883
        self.username = username or parsed.username or os.environ.get("MQTT_USER")
        self.password = password or parsed.password or os.environ.get("MQTT_PASS")
        self._connected = threading.Event()
        if client is None:
            import paho.mqtt.client as mqtt

            client = mqtt.Client(mqtt.CallbackAPIVersion.VERSION2)
        self.client = client
        if self.username:
            self.client.username_pw_set(self.username, self.password)
        self.client.on_connect = self._on_connect
        self.client.on_disconnect = self._on_disconnect

    def _on_connect(self, client, userdata, flags, reason_code, properties=None):
        if not getattr(reason_code, "is_failure", False):
            self._connected.set()

    def _on_disconnect(self, client, userdata, *args):
        self._connected.clear()

    def connect(self, wait_s: float = 5.0) -> bool:
        self.client.connect_async(self.host, self.port)
        self.client.reconnect_delay_set(min_delay=1, max_delay=30)
        self.client.loop_start()
        return self._connected.wait(wait_s)

    @property
    def connected(self) -> bool:
        return self._connected.is_set()

    def send(self, topic: str, payload: bytes, qos: int = 1) -> None:
        if not self.connected:
            raise SinkDisconnected(f"not connected to {self.host}:{self.port}")
        info = self.client.publish(topic, payload, qos=qos)
        if info.rc != 0:
            raise SinkDisconnected(f"publish to {topic} failed with rc={info.rc}")

    def close(self) -> None:
        self.client.loop_stop()
        self.client.disconnect()


class Ack(enum.Enum):
    DELIVERED = "delivered"
    BUFFERED = "buffered"


class AlertPublisher:
    """Bounded FIFO in front of a sink.

    While the sink is down events queue up; when full the oldest is dropped
    and ``dropped`` increments. ``flush`` (or the background thread started
    by ``start``) drains the queue in order once the sink is back.
    """

    def __init__(self, sink, capacity: int = DEFAULT_CAPACITY):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.sink = sink
        self.capacity = capacity
        self.published = 0
        self.dropped = 0
        self.attempts = 0
        self._buffer: deque = deque()
        self._cond = threading.Condition()
        self._thread: Optional[threading.Thread] = None
        self._stopping = False

    def __len__(self) -> int:
        return len(self._buffer)

    def publish(self, event: AlertEvent) -> Ack:
        item = (event.topic, event.payload())
        with self._cond:
            self.attempts += 1
            if len(self._buffer) >= self.capacity:
                self._buffer.popleft()
                self.dropped += 1
                log.warning("alert buffer full; dropped oldest (total dropped %d)", self.dropped)
            self._buffer.append(item)
            self._cond.notify()
        if self._thread is None:
            self.flush()
            return Ack.BUFFERED if self._buffer else Ack.DELIVERED
        return Ack.BUFFERED

    def flush(self) -> int:
        sent = 0
        with self._cond:
            while self._buffer:
                topic, payload = self._buffer[0]
                try:
                    self.sink.send(topic, payload, qos=1)
                except SinkDisconnected:
                    break
                self._buffer.popleft()
                self.published += 1
                sent += 1
        return sent

    def start(self, poll_s: float = 0.05) -> None:
        def run():
            while True:
                with self._cond:
                    if self._stopping and not self._buffer:
                        return
                    if not self._buffer:
                        self._cond.wait(poll_s)
                        continue
                if not self.flush():
                    with self._cond:
                        if self._stopping:
                            return
                        self._cond.wait(poll_s)

        self._stopping = False
        self._thread = threading.Thread(target=run, name="alert-publisher", daemon=True)
        self._thread.start()

    def stop(self, timeout: float = 5.0) -> None:
        if self._thread is None:
            return
        with self._cond:
            self._stopping = True
            self._cond.notify_all()
        self._thread.join(timeout)
        self._thread = None
        self.flush()


def publish(event: AlertEvent, sink, publisher: Optional[AlertPublisher] = None) -> Ack:
    """Publish through ``publisher`` if given, else directly through a fresh one on ``sink``."""
    return (publisher or AlertPublisher(sink)).publish(event)
