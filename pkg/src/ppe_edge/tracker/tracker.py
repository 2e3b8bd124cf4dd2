"""Tracking-by-detection with a matching cascade and IoU fallback.

Per frame: predict every track, associate confirmed tracks by gated
motion/appearance cost in order of staleness, match what is left by IoU,
then update, spawn and retire tracks.
"""

from __future__ import annotations

import enum
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core import BBox, Detection, HeadClass, Point, footpoint, iou
from .assignment import min_cost_matching
from .kalman import CHI2_95_4DOF, KalmanFilter, KalmanState

log = logging.getLogger(__name__)


class NonMonotonicFrame(ValueError):
    pass


class TrackStatus(enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    DELETED = "deleted"


@dataclass(frozen=True)
class TrackerConfig:
    max_age: int = 30
    n_init: int = 3
    gating_threshold: float = CHI2_95_4DOF
    iou_gate: float = 0.3
    footpoint_source: str = "filtered"  # posterior box after update, or "detection"
    iou_max_age: int = 3  # confirmed tracks missed at most this long also get the IoU stage
    appearance_weight: float = 0.0
    max_cost: float = 1.0
    std_weight_position: float = 1.0 / 20
    std_weight_velocity: float = 1.0 / 160
    process_noise_scale: float = 1.0
    measurement_noise_scale: float = 1.0
    duplicate_iou: Optional[float] = 0.7  # two confirmed tracks this close: keep the one with more hits
    frame_size: Optional[Tuple[int, int]] = None  # (w, h); a missed track predicted off-image is dropped

    def __post_init__(self):
        if self.max_age < 1 or self.n_init < 1:
            raise ValueError("max_age and n_init must be at least 1")
        if not 0.0 <= self.appearance_weight <= 1.0:
            raise ValueError("appearance_weight must be in [0, 1]")
        if self.footpoint_source not in ("filtered", "detection"):
            raise ValueError("footpoint_source must be 'filtered' or 'detection'")
        if self.iou_max_age < 0:
            raise ValueError("iou_max_age must be non-negative")

    def kalman(self) -> KalmanFilter:
        return KalmanFilter(
            self.std_weight_position,
            self.std_weight_velocity,
            self.process_noise_scale,
            self.measurement_noise_scale,
        )

    @classmethod
    def from_dict(cls, d: dict) -> "TrackerConfig":
        d = dict(d)
        if d.get("frame_size") is not None:
            d["frame_size"] = tuple(d["frame_size"])
        return cls(**d)


@dataclass
class Track:
    track_id: int
    state: KalmanState
    status: TrackStatus = TrackStatus.TENTATIVE
    hits: int = 1
    age: int = 0
    time_since_update: int = 0
    class_votes: Counter = field(default_factory=Counter)
    last_class: Optional[HeadClass] = None
    last_feature: Optional[np.ndarray] = None
    last_bbox: Optional[BBox] = None
    prev_footpoint: Optional[Point] = None
    position: Optional[Point] = None

    @property
    def is_confirmed(self) -> bool:
        return self.status is TrackStatus.CONFIRMED

    @property
    def cls(self) -> Optional[HeadClass]:
        """Majority class; a tie goes to the most recent detection's class."""
        if not self.class_votes:
            return None
        top = max(self.class_votes.values())
        leaders = [c for c, v in self.class_votes.items() if v == top]
        if len(leaders) == 1:
            return leaders[0]
        return self.last_class

    @property
    def helmeted(self) -> bool:
        return self.cls is HeadClass.HELMETED

    @property
    def footpoint(self) -> Optional[Point]:
        return self.position

    def predicted_bbox(self) -> BBox:
        cx, cy, a, h = self.state.mean[:4]
        # a long coast can drive the predicted size through zero
        return BBox.from_xyah((cx, cy, max(a, 0.0), max(h, 0.0)))

    def _absorb(self, det: Detection, filtered: bool = False) -> None:
        self.prev_footpoint = self.position
        self.last_bbox = det.bbox
        self.position = footpoint(self.predicted_bbox() if filtered else det.bbox)
        self.class_votes[det.cls] += 1
        self.last_class = det.cls
        if det.feature is not None:
            self.last_feature = det.feature


def _motion_appearance_cost(
    tracks: Sequence[Track],
    detections: Sequence[Detection],
    cfg: TrackerConfig,
    kf: KalmanFilter,
) -> np.ndarray:
    cost = np.zeros((len(tracks), len(detections)))
    if not len(tracks) or not len(detections):
        return cost
    z = np.array([d.bbox.to_xyah() for d in detections])
    lam = cfg.appearance_weight
    for r, trk in enumerate(tracks):
        d2 = kf.mahalanobis(trk.state, z)
        motion = d2 / cfg.gating_threshold
        row = motion.copy()
        if lam > 0 and trk.last_feature is not None:
            for c, det in enumerate(detections):
                if det.feature is not None:
                    appearance = 1.0 - float(np.dot(trk.last_feature, det.feature))
                    row[c] = lam * appearance + (1 - lam) * motion[c]
        row[d2 > cfg.gating_threshold] = np.inf
        cost[r] = row
    return cost


def _iou_cost(tracks: Sequence[Track], detections: Sequence[Detection]) -> np.ndarray:
    cost = np.ones((len(tracks), len(detections)))
    for r, trk in enumerate(tracks):
        box = trk.predicted_bbox()
        for c, det in enumerate(detections):
            cost[r, c] = 1.0 - iou(box, det.bbox)
    return cost


def associate(
    tracks: Sequence[Track],
    detections: Sequence[Detection],
    cfg: TrackerConfig,
    kf: Optional[KalmanFilter] = None,
) -> Tuple[List[Tuple[int, int]], List[int], List[int]]:
    """Return ``(matches, unmatched_tracks, unmatched_detections)`` as list indices.

    Tracks must already be predicted to the current frame.
    """
    kf = kf or cfg.kalman()
    confirmed = [i for i, t in enumerate(tracks) if t.is_confirmed]
    unconfirmed = [i for i, t in enumerate(tracks) if not t.is_confirmed]

    matches: List[Tuple[int, int]] = []
    remaining = list(range(len(detections)))
    for level in sorted({tracks[i].time_since_update for i in confirmed}):
        if not remaining:
            break
        level_tracks = [i for i in confirmed if tracks[i].time_since_update == level]
        cost = _motion_appearance_cost(
            [tracks[i] for i in level_tracks], [detections[j] for j in remaining], cfg, kf
        )
        pairs, _, _ = min_cost_matching(cost, cfg.max_cost)
        matched_cols = set()
        for r, c in pairs:
            matches.append((level_tracks[r], remaining[c]))
            matched_cols.add(c)
        remaining = [d for k, d in enumerate(remaining) if k not in matched_cols]

    matched_tracks = {t for t, _ in matches}
    unmatched_confirmed = [i for i in confirmed if i not in matched_tracks]
    iou_candidates = unconfirmed + [
        i for i in unmatched_confirmed if tracks[i].time_since_update <= cfg.iou_max_age
    ]
    cost = _iou_cost([tracks[i] for i in iou_candidates], [detections[j] for j in remaining])
    pairs, _, _ = min_cost_matching(cost, 1.0 - cfg.iou_gate)
    matched_cols = set()
    for r, c in pairs:
        matches.append((iou_candidates[r], remaining[c]))
        matched_cols.add(c)
    remaining = [d for k, d in enumerate(remaining) if k not in matched_cols]

    matched_tracks = {t for t, _ in matches}
    unmatched_tracks = [i for i in range(len(tracks)) if i not in matched_tracks]
    return sorted(matches), unmatched_tracks, remaining


class Tracker:
    """Single-stream tracker; call :meth:`step` once per frame in index order."""

    def __init__(self, cfg: Optional[TrackerConfig] = None):
        self.cfg = cfg or TrackerConfig()
        self.kf = self.cfg.kalman()
        self.tracks: List[Track] = []
        self.confirmed_ids: List[int] = []
        self._next_id = 1
        self._last_frame: Optional[int] = None

    def step(self, detections: Sequence[Detection], frame_index: int) -> List[Track]:
        if self._last_frame is not None and frame_index <= self._last_frame:
            raise NonMonotonicFrame(f"frame {frame_index} after {self._last_frame}")
        dt = 1 if self._last_frame is None else frame_index - self._last_frame
        self._last_frame = frame_index
        detections = [d for d in detections if d.bbox.h > 0 and d.bbox.w > 0]

        for trk in self.tracks:
            trk.state = self.kf.predict(trk.state, dt)
            trk.age += dt
            trk.time_since_update += dt

        matches, unmatched_tracks, unmatched_dets = associate(self.tracks, detections, self.cfg, self.kf)

        for t, d in matches:
            trk, det = self.tracks[t], detections[d]
            trk.state = self.kf.update(trk.state, det.bbox.to_xyah())
            trk.hits += 1
            trk.time_since_update = 0
            trk._absorb(det, self.cfg.footpoint_source == "filtered")
            if trk.status is TrackStatus.TENTATIVE and trk.hits >= self.cfg.n_init:
                trk.status = TrackStatus.CONFIRMED
                self.confirmed_ids.append(trk.track_id)
        for t in unmatched_tracks:
            trk = self.tracks[t]
            if (
                trk.status is TrackStatus.TENTATIVE
                or trk.time_since_update > self.cfg.max_age
                or self._off_image(trk)
            ):
                trk.status = TrackStatus.DELETED
        for d in unmatched_dets:
            self._spawn(detections[d])

        if self.cfg.duplicate_iou is not None:
            self._drop_duplicates()
        self.tracks = [t for t in self.tracks if t.status is not TrackStatus.DELETED]
        return [t for t in self.tracks if t.is_confirmed]

    def _drop_duplicates(self) -> None:
        live = [t for t in self.tracks if t.is_confirmed]
        boxes = [t.predicted_bbox() for t in live]
        for i in range(len(live)):
            for j in range(i + 1, len(live)):
                a, b = live[i], live[j]
                if a.status is TrackStatus.DELETED or b.status is TrackStatus.DELETED:
                    continue
                if a.last_feature is not None and b.last_feature is not None:
                    if float(np.dot(a.last_feature, b.last_feature)) < 0.5:
                        continue  # overlapping but visibly different people
                if iou(boxes[i], boxes[j]) > self.cfg.duplicate_iou:
                    # fewer hits loses; on a tie the newer id goes
                    loser = b if (a.hits, -a.track_id) >= (b.hits, -b.track_id) else a
                    loser.status = TrackStatus.DELETED

    def _off_image(self, trk: Track) -> bool:
        if self.cfg.frame_size is None:
            return False
        w, h = self.cfg.frame_size
        b = trk.predicted_bbox()
        return b.x + b.w <= 0 or b.y + b.h <= 0 or b.x >= w or b.y >= h

    def _spawn(self, det: Detection) -> None:
        trk = Track(self._next_id, self.kf.initiate(det.bbox.to_xyah()))
        self._next_id += 1
        trk._absorb(det)
        if self.cfg.n_init <= 1:
            trk.status = TrackStatus.CONFIRMED
            self.confirmed_ids.append(trk.track_id)
        self.tracks.append(trk)
