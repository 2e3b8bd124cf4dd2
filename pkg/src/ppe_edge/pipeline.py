"""Source -> prefilter -> detector -> tracker -> counter -> alerts.

Source, prefilter and detection each run in their own thread, joined by
bounded queues; a full queue blocks the producer, so no frame is ever
dropped for lack of room. Tracking, counting and alerting run on the
calling thread in strict frame order.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Tuple, Union

import numpy as np

from .alerting import AlertEvent, AlertKind, AlertPublisher, InMemorySink, MqttSink, StdoutSink
from .core import Detection, Frame, ZoneConfig
from .counter import CountEvent, Direction, HourlyTable, LineCounter, day_start_ms, hourly_aggregate
from .detector import (
    BackendUnavailable,
    DetectorBackend,
    RemoteBackend,
    ScenarioConfig,
    SyntheticBackend,
    load_replay,
)
from .detector.synthetic import BACKGROUND, DEFAULT_START_MS, render_frame
from .prefilter import Prefilter, PrefilterConfig
from .tracker import Tracker, TrackerConfig

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_IO = 4


class ConfigError(ValueError):
    pass


def derive_seed(seed: int, component: str) -> int:
    """Stable per-component seed from the single config seed."""
    key = [ord(c) for c in component]
    return int(np.random.SeedSequence([int(seed), *key]).generate_state(1)[0])


def _one_of(d: Any, what: str, kinds: Tuple[str, ...]) -> Tuple[str, Any]:
    if not isinstance(d, dict) or len(d) != 1:
        raise ConfigError(f"{what} must name exactly one of {', '.join(kinds)}")
    (kind, value), = d.items()
    if kind not in kinds:
        raise ConfigError(f"unknown {what} {kind!r}; expected one of {', '.join(kinds)}")
    return kind, value


@dataclass
class PipelineConfig:
    source_kind: str
    source_path: Path
    backend_kind: str
    backend_opts: Dict[str, Any]
    zones: ZoneConfig
    prefilter: PrefilterConfig = field(default_factory=PrefilterConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    alerting_kind: str = "memory"
    alerting_opts: Dict[str, Any] = field(default_factory=dict)
    outputs: Dict[str, Optional[Path]] = field(default_factory=dict)
    seed: Optional[int] = None
    queue_depth: int = 32
    frame_size: Tuple[int, int] = (320, 240)
    fps: float = 10.0
    start_ms: int = DEFAULT_START_MS
    day: Optional[str] = None

    @classmethod
    def from_dict(cls, d: dict, base_dir: Union[str, Path] = ".", out_dir: Union[str, Path, None] = None) -> "PipelineConfig":
        base = Path(base_dir)
        out = Path(out_dir) if out_dir is not None else Path(".")

        def resolve(p) -> Path:
            p = Path(p)
            return p if p.is_absolute() else base / p

        try:
            source_kind, source_path = _one_of(d.get("source"), "source", ("scenario", "replay_frames", "detections_only"))
            backend_kind, backend = _one_of(d.get("backend"), "backend", ("replay", "synthetic", "remote"))
            if backend_kind == "replay":
                backend_opts = {"path": resolve(backend if isinstance(backend, str) else backend["path"])}
            elif backend_kind == "remote":
                if "endpoint" not in backend:
                    raise ConfigError("remote backend needs an endpoint")
                backend_opts = dict(backend)
            else:
                backend_opts = dict(backend or {})
            if backend_kind == "synthetic" and source_kind != "scenario":
                raise ConfigError("the synthetic backend needs a scenario source")
            zones = d.get("zones")
            if zones is None:
                raise ConfigError("zones are required")
            zones = ZoneConfig.load(resolve(zones)) if isinstance(zones, str) else ZoneConfig.from_dict(zones)
            alerting_kind, alerting_opts = _one_of(d.get("alerting", {"memory": {}}), "alerting", ("mqtt", "stdout", "memory"))
            outputs = {
                k: (None if v is None else (Path(v) if Path(v).is_absolute() else out / v))
                for k, v in d.get("outputs", {}).items()
            }
            return cls(
                source_kind=source_kind,
                source_path=resolve(source_path),
                backend_kind=backend_kind,
                backend_opts=backend_opts,
                zones=zones,
                prefilter=PrefilterConfig.from_dict(d.get("prefilter", {})),
                tracker=TrackerConfig.from_dict(d.get("tracker", {})),
                alerting_kind=alerting_kind,
                alerting_opts=dict(alerting_opts or {}),
                outputs=outputs,
                seed=d.get("seed"),
                queue_depth=int(d.get("queue_depth", 32)),
                frame_size=tuple(d.get("frame_size", (320, 240))),
                fps=float(d.get("fps", 10.0)),
                start_ms=int(d.get("start_ms", DEFAULT_START_MS)),
                day=d.get("day"),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid pipeline config: {exc}") from exc

    @classmethod
    def load(cls, path: Union[str, Path], out_dir: Union[str, Path, None] = None) -> "PipelineConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(d, path.parent, out_dir)


class LatencyHistogram:
    """Power-of-two microsecond buckets."""

    def __init__(self):
        self.buckets: Dict[int, int] = {}
        self.count = 0
        self.total_us = 0

    def record(self, us: float) -> None:
        us = max(int(us), 0)
        edge = 1 << max(us, 1).bit_length()
        self.buckets[edge] = self.buckets.get(edge, 0) + 1
        self.count += 1
        self.total_us += us

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "mean_us": self.total_us / self.count if self.count else 0.0,
            "buckets_le_us": {str(k): v for k, v in sorted(self.buckets.items())},
        }


@dataclass
class PipelineMetrics:
    frames_examined: int = 0
    frames_passed: int = 0
    frames_discarded: int = 0
    frames_discarded_brightness: int = 0
    frames_discarded_motion: int = 0
    frames_skipped_backend: int = 0
    detections_total: int = 0
    tracks_confirmed: int = 0
    events_in: int = 0
    events_out: int = 0
    events_no_helmet: int = 0
    alerts_published: int = 0
    alerts_dropped: int = 0
    latency: Dict[str, LatencyHistogram] = field(
        default_factory=lambda: {k: LatencyHistogram() for k in ("prefilter", "detect", "track", "count")}
    )

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "latency"}
        d["latency_us"] = {k: h.to_dict() for k, h in self.latency.items()}
        return d


@dataclass
class RunResult:
    counts: HourlyTable
    events: List[CountEvent]
    alerts: List[AlertEvent]
    metrics: PipelineMetrics
    sink: Any
    exit_code: int = EXIT_OK

    def events_jsonl(self) -> str:
        return "".join(line + "\n" for line in _event_lines(self.events, self.alerts))


def _event_lines(events: List[CountEvent], alerts: List[AlertEvent]) -> Iterator[str]:
    for ev, alert in zip(events, alerts):
        yield json.dumps(ev.to_dict(), separators=(",", ":"))
        yield json.dumps({"type": "alert", "topic": alert.topic, **alert.to_dict()}, separators=(",", ":"))


_END = object()


class _Failure:
    def __init__(self, exc: BaseException):
        self.exc = exc


def threaded(items: Iterable, depth: int, stop: threading.Event, name: str) -> Iterator:
    """Run ``items`` in a producer thread behind a bounded queue."""
    q: queue.Queue = queue.Queue(maxsize=max(1, depth))

    def put(item) -> bool:
        while not stop.is_set():
            try:
                q.put(item, timeout=0.05)
                return True
            except queue.Full:
                continue
        return False

    def produce():
        try:
            for item in items:
                if not put(item):
                    return
            put(_END)
        except BaseException as exc:  # surfaced on the consumer side
            put(_Failure(exc))

    t = threading.Thread(target=produce, name=name, daemon=True)
    t.start()
    try:
        while True:
            item = q.get()
            if item is _END:
                return
            if isinstance(item, _Failure):
                raise item.exc
            yield item
    except BaseException:
        # consumer gave up early: unblock every producer upstream
        stop.set()
        raise


@dataclass
class _Detected:
    frame: Frame
    clock: int  # tracker time, see Pipeline._prefiltered
    detections: Optional[List[Detection]]  # None: backend gave up on this frame


def _detect_in_order(
    frames: Iterable[Tuple[Frame, int]],
    backend: DetectorBackend,
    metrics: PipelineMetrics,
    max_inflight: int,
    halt_on_failure: bool,
) -> Iterator[_Detected]:
    def timed(frame: Frame):
        t0 = time.perf_counter()
        try:
            return backend.detect(frame), (time.perf_counter() - t0) * 1e6
        except BackendUnavailable as exc:
            return exc, (time.perf_counter() - t0) * 1e6

    def settle(frame: Frame, clock: int, outcome) -> _Detected:
        result, us = outcome
        metrics.latency["detect"].record(us)
        if isinstance(result, BackendUnavailable):
            if halt_on_failure:
                raise result
            log.warning("frame %d skipped: %s", frame.index, result)
            metrics.frames_skipped_backend += 1
            return _Detected(frame, clock, None)
        return _Detected(frame, clock, result)

    if max_inflight <= 1:
        for frame, clock in frames:
            yield settle(frame, clock, timed(frame))
        return
    pending: deque = deque()
    with ThreadPoolExecutor(max_workers=max_inflight, thread_name_prefix="detect") as pool:
        for frame, clock in frames:
            pending.append((frame, clock, pool.submit(timed, frame)))
            if len(pending) >= max_inflight:
                f, c, fut = pending.popleft()
                yield settle(f, c, fut.result())
        while pending:
            f, c, fut = pending.popleft()
            yield settle(f, c, fut.result())


def load_frames_npz(path: Union[str, Path]) -> Iterator[Frame]:
    with np.load(path) as data:
        pixels, indices, stamps = data["pixels"], data["index"], data["timestamp"]
    n, h, w = pixels.shape
    for k in range(n):
        yield Frame(int(indices[k]), int(stamps[k]), w, h, pixels[k])


def save_frames_npz(path: Union[str, Path], frames: Iterable[Frame]) -> None:
    frames = list(frames)
    np.savez_compressed(
        path,
        pixels=np.stack([f.pixels for f in frames]) if frames else np.zeros((0, 1, 1), np.uint8),
        index=np.array([f.index for f in frames], dtype=np.int64),
        timestamp=np.array([f.timestamp for f in frames], dtype=np.int64),
    )


class Pipeline:
    def __init__(self, cfg: PipelineConfig, sink=None):
        self.cfg = cfg
        self.metrics = PipelineMetrics()
        self.scenario: Optional[ScenarioConfig] = None
        if cfg.source_kind == "scenario":
            try:
                scenario = ScenarioConfig.load(cfg.source_path)
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"{cfg.source_path}: {exc}") from exc
            if cfg.seed is not None:
                scenario = ScenarioConfig(
                    derive_seed(cfg.seed, "scenario"),
                    scenario.duration_frames,
                    scenario.actors,
                    scenario.noise,
                    scenario.width,
                    scenario.height,
                    scenario.fps,
                    scenario.start_ms,
                )
            self.scenario = scenario
        self.backend = self._make_backend()
        self.sink = sink if sink is not None else self._make_sink()

    def _make_backend(self) -> DetectorBackend:
        cfg = self.cfg
        if cfg.backend_kind == "replay":
            return load_replay(cfg.backend_opts["path"], strict=bool(cfg.backend_opts.get("strict", False)))
        if cfg.backend_kind == "synthetic":
            return SyntheticBackend(self.scenario)
        o = cfg.backend_opts
        return RemoteBackend(
            o["endpoint"],
            timeout_ms=float(o.get("timeout_ms", 2000)),
            max_inflight=int(o.get("max_inflight", 4)),
            retries=int(o.get("retries", 2)),
            backoff_ms=float(o.get("backoff_ms", 100)),
        )

    def _make_sink(self):
        kind, o = self.cfg.alerting_kind, self.cfg.alerting_opts
        if kind == "memory":
            return InMemorySink()
        if kind == "stdout":
            return StdoutSink()
        sink = MqttSink(o.get("url"))
        if not sink.connect(float(o.get("connect_wait_s", 5.0))):
            log.warning("MQTT broker %s:%d unreachable; alerts will buffer", sink.host, sink.port)
        return sink

    def frames(self) -> Iterator[Frame]:
        cfg = self.cfg
        if cfg.source_kind == "scenario":
            sc = self.scenario
            return (render_frame(sc, f) for f in range(sc.duration_frames))
        if cfg.source_kind == "replay_frames":
            return load_frames_npz(cfg.source_path)
        backend = load_replay(cfg.source_path)
        last = backend.last_index
        w, h = cfg.frame_size

        def gen():
            if last is None:
                return
            for f in range(last + 1):
                ts = backend.timestamps.get(f, cfg.start_ms + int(round(f * 1000.0 / cfg.fps)))
                yield Frame.blank(f, ts, w, h, BACKGROUND)

        return gen()

    def _prefiltered(self, frames: Iterable[Frame]) -> Iterator[Tuple[Frame, int]]:
        """Admitted frames paired with the tracker clock.

        The clock is the frame index minus the frames dropped for lack of
        motion so far: nothing moved during those frames, so the motion model
        must not coast through them.
        """
        # a detections-only source has placeholder pixels; gating them would discard everything
        cfg = self.cfg.prefilter if self.cfg.source_kind != "detections_only" else PrefilterConfig.disabled()
        pf = Prefilter(cfg)
        m = self.metrics
        for frame in frames:
            t0 = time.perf_counter()
            ok = pf.admit(frame)
            m.latency["prefilter"].record((time.perf_counter() - t0) * 1e6)
            m.frames_examined = pf.metrics.examined
            m.frames_passed = pf.metrics.passed
            m.frames_discarded = pf.metrics.discarded
            m.frames_discarded_brightness = pf.metrics.discarded_brightness
            m.frames_discarded_motion = pf.metrics.discarded_motion
            if ok:
                yield frame, frame.index - pf.metrics.discarded_motion

    def run(self) -> RunResult:
        cfg = self.cfg
        m = self.metrics
        tcfg = cfg.tracker
        if tcfg.frame_size is None:
            size = (self.scenario.width, self.scenario.height) if cfg.source_kind == "scenario" else cfg.frame_size
            tcfg = replace(tcfg, frame_size=tuple(size))
        tracker = Tracker(tcfg)
        counter = LineCounter(cfg.zones)
        publisher = AlertPublisher(self.sink, int(cfg.alerting_opts.get("capacity", 10_000)))
        background = cfg.alerting_kind == "mqtt"
        if background:
            publisher.start()
        events: List[CountEvent] = []
        alerts: List[AlertEvent] = []
        first_ts: Optional[int] = None
        stop = threading.Event()
        depth = cfg.queue_depth
        max_inflight = int(cfg.backend_opts.get("max_inflight", 1)) if cfg.backend_kind == "remote" else 1
        halt = cfg.backend_opts.get("on_failure", "skip") == "halt"
        try:
            frames = threaded(self.frames(), depth, stop, "source")
            passed = threaded(self._prefiltered(frames), depth, stop, "prefilter")
            detected = threaded(
                _detect_in_order(passed, self.backend, m, max_inflight, halt), depth, stop, "detect"
            )
            for item in detected:
                frame = item.frame
                if first_ts is None:
                    first_ts = frame.timestamp
                if item.detections is None:
                    continue
                m.detections_total += len(item.detections)
                t0 = time.perf_counter()
                confirmed = tracker.step(item.detections, item.clock)
                m.latency["track"].record((time.perf_counter() - t0) * 1e6)
                t0 = time.perf_counter()
                for trk in confirmed:
                    if trk.time_since_update != 0 or trk.prev_footpoint is None:
                        continue
                    for ev in counter.observe(
                        trk.track_id, trk.helmeted, trk.prev_footpoint, trk.footpoint, frame.timestamp, frame.index
                    ):
                        if ev.helmeted:
                            kind = AlertKind.COUNT_IN if ev.direction is Direction.IN else AlertKind.COUNT_OUT
                        else:
                            kind = AlertKind.NO_HELMET
                        alert = AlertEvent(kind, cfg.zones.camera_id, ev.timestamp, ev.track_id, trk.last_bbox)
                        events.append(ev)
                        alerts.append(alert)
                        publisher.publish(alert)
                m.latency["count"].record((time.perf_counter() - t0) * 1e6)
        finally:
            stop.set()
            if background:
                publisher.stop()
            publisher.flush()
            self.backend.close()

        m.tracks_confirmed = len(tracker.confirmed_ids)
        helmeted = [e for e in events if e.helmeted]
        m.events_in = sum(e.direction is Direction.IN for e in helmeted)
        m.events_out = sum(e.direction is Direction.OUT for e in helmeted)
        m.events_no_helmet = sum(not e.helmeted for e in events)
        m.alerts_published = publisher.published
        m.alerts_dropped = publisher.dropped

        if cfg.day is not None:
            start = day_start_ms(cfg.day)
        else:
            ts = first_ts if first_ts is not None else cfg.start_ms
            start = day_start_ms(datetime.fromtimestamp(ts / 1000, tz=timezone.utc))
        counts = hourly_aggregate(helmeted, start)
        if counts.out_of_range:
            log.warning("%d count events fall outside 05:00-19:00", len(counts.out_of_range))
        result = RunResult(counts, events, alerts, m, self.sink)
        self._write_outputs(result)
        return result

    def _write_outputs(self, result: RunResult) -> None:
        outs = self.cfg.outputs
        for key, text in (
            ("counts_csv", lambda: result.counts.to_csv()),
            ("counts_paper_csv", lambda: result.counts.to_paper_csv()),
            ("events_jsonl", result.events_jsonl),
            ("metrics_json", lambda: json.dumps(result.metrics.to_dict(), indent=2) + "\n"),
        ):
            path = outs.get(key)
            if path is None:
                continue
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text())


def run(config: Union[PipelineConfig, str, Path], sink=None, out_dir=None) -> RunResult:
    if not isinstance(config, PipelineConfig):
        config = PipelineConfig.load(config, out_dir)
    return Pipeline(config, sink).run()
