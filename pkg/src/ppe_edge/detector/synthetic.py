"""Scripted scenarios: actors walk waypoint paths, optionally linger or put
their helmet on late, and a seeded noise model corrupts what the detector sees.

Everything here is a pure function of the scenario config and the frame
index, so detections can be regenerated for any frame in any order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core import BBox, Detection, Frame, HeadClass, ZoneConfig, footpoint
from ..counter import Direction, LineCounter
from .base import Capability, DetectorBackend, clip_detections

BACKGROUND = 20
ACTOR_INTENSITY = 200
TRUE_CONFIDENCE = 0.9
DEFAULT_START_MS = int(datetime(2022, 11, 22, 7, tzinfo=timezone.utc).timestamp() * 1000)


@dataclass(frozen=True)
class NoiseConfig:
    miss_prob: float = 0.0
    false_positive_rate: float = 0.0
    bbox_jitter_std: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.miss_prob <= 1.0:
            raise ValueError("miss_prob must be in [0, 1]")
        if self.false_positive_rate < 0 or self.bbox_jitter_std < 0:
            raise ValueError("false_positive_rate and bbox_jitter_std must be non-negative")

    @property
    def is_clean(self) -> bool:
        return self.miss_prob == 0 and self.false_positive_rate == 0 and self.bbox_jitter_std == 0


@dataclass(frozen=True)
class ActorScript:
    """``waypoints`` are ``(frame, cx, cy)`` box centres, linearly interpolated.

    ``helmet_schedule`` entries are ``(start, end, helmeted)`` over half-open
    frame ranges that together cover the actor's lifetime.
    """

    actor_id: int
    waypoints: Tuple[Tuple[int, float, float], ...]
    helmet_schedule: Tuple[Tuple[int, int, bool], ...] = ()
    box_size: Tuple[float, float] = (24.0, 24.0)
    feature: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        wps = tuple((int(f), float(x), float(y)) for f, x, y in self.waypoints)
        if len(wps) < 1:
            raise ValueError(f"actor {self.actor_id} has no waypoints")
        frames = [w[0] for w in wps]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValueError(f"actor {self.actor_id}: waypoint frames must strictly increase")
        object.__setattr__(self, "waypoints", wps)
        sched = tuple((int(s), int(e), bool(h)) for s, e, h in self.helmet_schedule)
        if not sched:
            sched = ((self.first_frame, self.last_frame + 1, True),)
        sched = tuple(sorted(sched))
        if sched[0][0] > self.first_frame or sched[-1][1] <= self.last_frame:
            raise ValueError(f"actor {self.actor_id}: helmet schedule does not cover the lifetime")
        if any(a[1] != b[0] for a, b in zip(sched, sched[1:])):
            raise ValueError(f"actor {self.actor_id}: helmet schedule ranges must be disjoint and contiguous")
        object.__setattr__(self, "helmet_schedule", sched)
        object.__setattr__(self, "box_size", (float(self.box_size[0]), float(self.box_size[1])))
        if self.feature is not None:
            f = np.asarray(self.feature, dtype=float)
            object.__setattr__(self, "feature", tuple(f / np.linalg.norm(f)))

    @property
    def first_frame(self) -> int:
        return self.waypoints[0][0]

    @property
    def last_frame(self) -> int:
        return self.waypoints[-1][0]

    def position(self, frame: int) -> Optional[Tuple[float, float]]:
        if not self.first_frame <= frame <= self.last_frame:
            return None
        f = [w[0] for w in self.waypoints]
        x = float(np.interp(frame, f, [w[1] for w in self.waypoints]))
        y = float(np.interp(frame, f, [w[2] for w in self.waypoints]))
        return x, y

    def helmeted(self, frame: int) -> bool:
        for start, end, h in self.helmet_schedule:
            if start <= frame < end:
                return h
        raise ValueError(f"frame {frame} outside actor {self.actor_id}'s schedule")

    def bbox(self, frame: int) -> Optional[BBox]:
        pos = self.position(frame)
        if pos is None:
            return None
        w, h = self.box_size
        return BBox(pos[0] - w / 2, pos[1] - h / 2, w, h)

    def to_dict(self) -> dict:
        d = {
            "actor_id": self.actor_id,
            "waypoints": [list(w) for w in self.waypoints],
            "helmet_schedule": [list(s) for s in self.helmet_schedule],
            "box_size": list(self.box_size),
        }
        if self.feature is not None:
            d["feature"] = list(self.feature)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ActorScript":
        sched = d.get("helmet_schedule")
        if sched is None and "helmeted" in d:
            f0, f1 = d["waypoints"][0][0], d["waypoints"][-1][0]
            sched = [[f0, f1 + 1, bool(d["helmeted"])]]
        return cls(
            int(d["actor_id"]),
            tuple(tuple(w) for w in d["waypoints"]),
            tuple(tuple(s) for s in (sched or ())),
            tuple(d.get("box_size", (24, 24))),
            tuple(d["feature"]) if d.get("feature") is not None else None,
        )


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    duration_frames: int
    actors: Tuple[ActorScript, ...] = ()
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    width: int = 320
    height: int = 240
    fps: float = 10.0
    start_ms: int = DEFAULT_START_MS

    def __post_init__(self):
        if self.duration_frames <= 0:
            raise ValueError("duration_frames must be positive")
        object.__setattr__(self, "actors", tuple(self.actors))
        ids = [a.actor_id for a in self.actors]
        if len(set(ids)) != len(ids):
            raise ValueError("actor ids must be unique")

    def timestamp(self, frame: int) -> int:
        return self.start_ms + int(round(frame * 1000.0 / self.fps))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "duration_frames": self.duration_frames,
            "width": self.width,
            "height": self.height,
            "fps": self.fps,
            "start_ms": self.start_ms,
            "noise": {
                "miss_prob": self.noise.miss_prob,
                "false_positive_rate": self.noise.false_positive_rate,
                "bbox_jitter_std": self.noise.bbox_jitter_std,
            },
            "actors": [a.to_dict() for a in self.actors],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        return cls(
            seed=int(d["seed"]),
            duration_frames=int(d["duration_frames"]),
            actors=tuple(ActorScript.from_dict(a) for a in d.get("actors", ())),
            noise=NoiseConfig(**d.get("noise", {})),
            width=int(d.get("width", 320)),
            height=int(d.get("height", 240)),
            fps=float(d.get("fps", 10.0)),
            start_ms=int(d.get("start_ms", DEFAULT_START_MS)),
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ScenarioConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def dump(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class TrueCrossing:
    actor_id: int
    line: Direction  # IN = entry line, OUT = exit line
    frame: int
    helmeted_at_crossing: bool

    def to_dict(self) -> dict:
        return {
            "actor_id": self.actor_id,
            "line": "entry" if self.line is Direction.IN else "exit",
            "frame": self.frame,
            "helmeted_at_crossing": self.helmeted_at_crossing,
        }


@dataclass
class GroundTruth:
    trajectories: Dict[int, List[Tuple[int, float, float]]]
    crossings: List[TrueCrossing]

    def to_dict(self) -> dict:
        return {
            "trajectories": {str(k): [list(p) for p in v] for k, v in self.trajectories.items()},
            "crossings": [c.to_dict() for c in self.crossings],
        }


def true_detections(cfg: ScenarioConfig, frame: int) -> List[Tuple[ActorScript, Detection]]:
    out = []
    for actor in cfg.actors:
        box = actor.bbox(frame)
        if box is None:
            continue
        box = box.clip(cfg.width, cfg.height)
        if box.w <= 0 or box.h <= 0:
            continue
        cls = HeadClass.HELMETED if actor.helmeted(frame) else HeadClass.UNHELMETED
        out.append((actor, Detection(box, TRUE_CONFIDENCE, cls, actor.feature)))
    return out


def noisy_detections(cfg: ScenarioConfig, frame: int) -> List[Detection]:
    """Scripted truth with i.i.d. misses, Gaussian corner jitter and Poisson false positives."""
    noise = cfg.noise
    truth = true_detections(cfg, frame)
    if noise.is_clean:
        return [d for _, d in truth]
    rng = np.random.default_rng([cfg.seed, frame])
    out = []
    for _, det in truth:
        missed = rng.random() < noise.miss_prob
        jitter = rng.normal(0.0, noise.bbox_jitter_std, 4) if noise.bbox_jitter_std > 0 else np.zeros(4)
        if missed:
            continue
        b = det.bbox
        x1, y1 = b.x + jitter[0], b.y + jitter[1]
        x2, y2 = b.x + b.w + jitter[2], b.y + b.h + jitter[3]
        x1, x2 = min(x1, x2), max(x1, x2)
        y1, y2 = min(y1, y2), max(y1, y2)
        box = BBox(x1, y1, x2 - x1, y2 - y1).clip(cfg.width, cfg.height)
        if box.w > 0 and box.h > 0:
            out.append(Detection(box, det.confidence, det.cls, det.feature))
    for _ in range(rng.poisson(noise.false_positive_rate)):
        w, h = rng.uniform(12, 40, 2)
        x = rng.uniform(0, cfg.width - w)
        y = rng.uniform(0, cfg.height - h)
        cls = HeadClass.HELMETED if rng.random() < 0.5 else HeadClass.UNHELMETED
        out.append(Detection(BBox(x, y, w, h), float(rng.uniform(0.3, 0.6)), cls))
    return out


def render_frame(cfg: ScenarioConfig, frame: int) -> Frame:
    pixels = np.full((cfg.height, cfg.width), BACKGROUND, dtype=np.uint8)
    for _, det in true_detections(cfg, frame):
        b = det.bbox
        x1, y1 = int(round(b.x)), int(round(b.y))
        x2, y2 = int(round(b.x + b.w)), int(round(b.y + b.h))
        pixels[y1:y2, x1:x2] = ACTOR_INTENSITY
    return Frame(frame, cfg.timestamp(frame), cfg.width, cfg.height, pixels)


def ground_truth(cfg: ScenarioConfig, zones: ZoneConfig) -> GroundTruth:
    """Crossings of the clean trajectories under the counter's own rules.

    The helmet flag is the majority class seen so far (ties go to the current
    class), which is what a track carrying every detection of the actor
    would report at that frame.
    """
    counter = LineCounter(zones)
    trajectories: Dict[int, List[Tuple[int, float, float]]] = {}
    crossings: List[TrueCrossing] = []
    for actor in cfg.actors:
        prev = None
        votes = {True: 0, False: 0}
        traj = trajectories.setdefault(actor.actor_id, [])
        for f in range(max(actor.first_frame, 0), min(actor.last_frame, cfg.duration_frames - 1) + 1):
            dets = [d for a, d in true_detections(cfg, f) if a.actor_id == actor.actor_id]
            if not dets:
                continue
            det = dets[0]
            h_now = det.cls is HeadClass.HELMETED
            votes[h_now] += 1
            helmeted = h_now if votes[True] == votes[False] else votes[True] > votes[False]
            x, y = actor.position(f)
            traj.append((f, x, y))
            fp = footpoint(det.bbox)
            if prev is not None:
                for ev in counter.observe(actor.actor_id, helmeted, prev, fp, cfg.timestamp(f), f):
                    crossings.append(TrueCrossing(actor.actor_id, ev.direction, f, helmeted))
            prev = fp
    crossings.sort(key=lambda c: (c.frame, c.actor_id, c.line.value))
    return GroundTruth(trajectories, crossings)


@dataclass
class Scenario:
    config: ScenarioConfig
    detections: Dict[int, List[Detection]]
    ground_truth: GroundTruth

    def frames(self) -> Iterator[Frame]:
        for f in range(self.config.duration_frames):
            yield render_frame(self.config, f)

    def blank_frames(self) -> Iterator[Frame]:
        cfg = self.config
        for f in range(cfg.duration_frames):
            yield Frame.blank(f, cfg.timestamp(f), cfg.width, cfg.height, BACKGROUND)

    def timestamps(self) -> Dict[int, int]:
        return {f: self.config.timestamp(f) for f in range(self.config.duration_frames)}


def generate_scenario(cfg: ScenarioConfig, zones: ZoneConfig) -> Scenario:
    """Detection stream for every frame plus the ground truth.

    Rendered frames are produced lazily by :meth:`Scenario.frames`.
    """
    detections = {f: noisy_detections(cfg, f) for f in range(cfg.duration_frames)}
    return Scenario(cfg, detections, ground_truth(cfg, zones))


class SyntheticBackend(DetectorBackend):
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.capability = Capability("synthetic", any(a.feature is not None for a in cfg.actors))

    def detect(self, frame: Frame) -> List[Detection]:
        if not 0 <= frame.index < self.cfg.duration_frames:
            return []
        return clip_detections(noisy_detections(self.cfg, frame.index), frame.width, frame.height)


# Script builders ---------------------------------------------------------


def walker(
    actor_id: int,
    x: float,
    start_frame: int,
    y_from: float,
    y_to: float,
    speed: float = 3.0,
    helmeted: bool = True,
    box_size: Tuple[float, float] = (24.0, 24.0),
) -> ActorScript:
    n = max(1, int(np.ceil(abs(y_to - y_from) / speed)))
    return ActorScript(
        actor_id,
        ((start_frame, x, y_from), (start_frame + n, x, y_to)),
        ((start_frame, start_frame + n + 1, helmeted),),
        box_size,
    )


def lingering_walker(
    actor_id: int,
    x: float,
    start_frame: int,
    line_y: float,
    crossings: int,
    y_from: float = 10.0,
    y_to: float = 230.0,
    amplitude: float = 15.0,
    speed: float = 3.0,
    box_size: Tuple[float, float] = (24.0, 24.0),
    helmeted: bool = True,
    pace_speed: Optional[float] = None,
    dwell: int = 0,
) -> ActorScript:
    """Walks down, crosses the horizontal line at ``line_y`` ``crossings``
    times by oscillating around it, then carries on.

    ``line_y`` is in footpoint coordinates; waypoints are box centres. The
    oscillation runs at ``pace_speed`` (default ``speed``) and the actor stands
    still for ``dwell`` frames at each turn.
    """
    half = box_size[1] / 2
    below, above = line_y + amplitude - half, line_y - amplitude - half
    pace = speed if pace_speed is None else pace_speed
    ys = [y_from]
    for k in range(crossings):
        ys.append(below if k % 2 == 0 else above)
    if crossings % 2 == 0:
        ys.append(below)
    ys.append(y_to)
    frame = start_frame
    wps = [(frame, x, ys[0])]
    last = len(ys) - 1
    for i, (a, b) in enumerate(zip(ys, ys[1:]), start=1):
        v = speed if i in (1, last) else pace
        frame += max(1, int(np.ceil(abs(b - a) / v)))
        wps.append((frame, x, b))
        if dwell > 0 and i < last:
            frame += dwell
            wps.append((frame, x, b))
    return ActorScript(actor_id, tuple(wps), ((start_frame, frame + 1, helmeted),), box_size)


def late_helmet_walker(
    actor_id: int,
    x: float,
    start_frame: int,
    helmet_on_y: float,
    y_from: float = 10.0,
    y_to: float = 230.0,
    speed: float = 3.0,
    box_size: Tuple[float, float] = (24.0, 24.0),
) -> ActorScript:
    """Enters bare-headed and puts the helmet on once its centre passes ``helmet_on_y``."""
    n = max(1, int(np.ceil(abs(y_to - y_from) / speed)))
    on = start_frame + int(np.ceil((helmet_on_y - y_from) / (y_to - y_from) * n))
    return ActorScript(
        actor_id,
        ((start_frame, x, y_from), (start_frame + n, x, y_to)),
        ((start_frame, on, False), (on, start_frame + n + 1, True)),
        box_size,
    )


def random_scenario(
    seed: int,
    n_actors: int,
    noise: Optional[NoiseConfig] = None,
    entry_line_y: float = 140.0,
    lanes: Sequence[float] = (40, 80, 120, 160, 200, 240, 280),
    spacing: int = 25,
    p_linger: float = 0.2,
    p_late_helmet: float = 0.15,
    p_unhelmeted: float = 0.1,
    linger_pace: float = 1.0,
    linger_dwell: int = 5,
) -> ScenarioConfig:
    """Seeded crowd of walkers in separate lanes, with some lingering or late-helmet actors.

    Each lane is reused only after its previous walker has left the frame,
    so noise-free tracks never have to disambiguate overlapping people.
    """
    rng = np.random.default_rng(seed)
    actors = []
    lane_free_at = {x: 0 for x in lanes}
    frame = 5
    for i in range(n_actors):
        x = min(lanes, key=lambda lx: (lane_free_at[lx], lx))
        start = max(frame, lane_free_at[x])
        speed = float(rng.uniform(2.0, 4.5))
        kind = rng.random()
        going_in = rng.random() < 0.6
        if kind < p_linger:
            k = int(rng.choice([1, 3, 5, 7, 9]))
            actor = lingering_walker(i, x, start, entry_line_y, k, speed=speed, pace_speed=linger_pace, dwell=linger_dwell)
        elif kind < p_linger + p_late_helmet:
            actor = late_helmet_walker(i, x, start, helmet_on_y=float(rng.uniform(170, 200)), speed=speed)
        else:
            y_from, y_to = (10.0, 230.0) if going_in else (230.0, 10.0)
            helmeted = rng.random() >= p_unhelmeted
            actor = walker(i, x, start, y_from, y_to, speed, helmeted)
        actors.append(actor)
        lane_free_at[x] = actor.last_frame + 15
        frame = start + int(rng.integers(spacing // 2, spacing + 1))
    duration = max((a.last_frame for a in actors), default=0) + 10
    return ScenarioConfig(seed, duration, tuple(actors), noise or NoiseConfig())
