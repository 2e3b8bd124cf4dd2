"""Domain types and geometry shared by every pipeline stage.

Coordinates are screen-style: x grows rightward, y grows downward.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

Point = Tuple[float, float]


class HeadClass(str, enum.Enum):
    HELMETED = "helmeted_head"
    UNHELMETED = "unhelmeted_head"


class CrossingDirection(str, enum.Enum):
    """Which side transition of a directed line counts.

    ``A_TO_LEFT`` counts a move onto the positive side (``line_side == +1``),
    ``A_TO_RIGHT`` a move onto the negative side.
    """

    A_TO_LEFT = "AtoLeft"
    A_TO_RIGHT = "AtoRight"

    @property
    def target_side(self) -> int:
        return 1 if self is CrossingDirection.A_TO_LEFT else -1


@dataclass(frozen=True)
class Frame:
    index: int
    timestamp: int  # ms since epoch
    width: int
    height: int
    pixels: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"frame dimensions must be positive, got {self.width}x{self.height}")
        pixels = np.asarray(self.pixels, dtype=np.uint8)
        if pixels.size != self.width * self.height:
            raise ValueError(
                f"pixel buffer has {pixels.size} values, expected {self.width * self.height}"
            )
        pixels = pixels.reshape(self.height, self.width)
        pixels.flags.writeable = False
        object.__setattr__(self, "pixels", pixels)

    @classmethod
    def blank(cls, index: int, timestamp: int, width: int, height: int, value: int = 0) -> "Frame":
        return cls(index, timestamp, width, height, np.full((height, width), value, np.uint8))


@dataclass(frozen=True)
class BBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w < 0 or self.h < 0:
            raise ValueError(f"negative box size: {self}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> Point:
        return (self.x + self.w / 2, self.y + self.h / 2)

    def contains(self, p: Point) -> bool:
        """Closed-interval membership; boundary points are inside."""
        return self.x <= p[0] <= self.x + self.w and self.y <= p[1] <= self.y + self.h

    def clip(self, width: float, height: float) -> "BBox":
        x1 = min(max(self.x, 0.0), width)
        y1 = min(max(self.y, 0.0), height)
        x2 = min(max(self.x + self.w, 0.0), width)
        y2 = min(max(self.y + self.h, 0.0), height)
        return BBox(x1, y1, x2 - x1, y2 - y1)

    def to_xyah(self) -> np.ndarray:
        """Center x, center y, aspect ratio w/h, height."""
        cx, cy = self.center
        return np.array([cx, cy, self.w / self.h, self.h], dtype=float)

    @classmethod
    def from_xyah(cls, xyah: Sequence[float]) -> "BBox":
        cx, cy, a, h = (float(v) for v in xyah[:4])
        w = a * h
        return cls(cx - w / 2, cy - h / 2, w, h)

    def to_dict(self) -> dict:
        return {"x": _num(self.x), "y": _num(self.y), "w": _num(self.w), "h": _num(self.h)}

    @classmethod
    def from_dict(cls, d: dict) -> "BBox":
        return cls(float(d["x"]), float(d["y"]), float(d["w"]), float(d["h"]))


@dataclass(frozen=True)
class Detection:
    bbox: BBox
    confidence: float
    cls: HeadClass
    feature: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of [0, 1]: {self.confidence}")
        object.__setattr__(self, "cls", HeadClass(self.cls))
        if self.feature is not None:
            feature = np.asarray(self.feature, dtype=float)
            norm = np.linalg.norm(feature)
            if abs(norm - 1.0) > 1e-6:
                raise ValueError(f"appearance feature must have unit norm, got {norm}")
            feature.flags.writeable = False
            object.__setattr__(self, "feature", feature)

    def to_dict(self) -> dict:
        d = {**self.bbox.to_dict(), "confidence": self.confidence, "class": self.cls.value}
        if self.feature is not None:
            d["feature"] = [float(v) for v in self.feature]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Detection":
        feature = d.get("feature")
        return cls(
            BBox.from_dict(d),
            float(d["confidence"]),
            HeadClass(d["class"]),
            None if feature is None else np.asarray(feature, dtype=float),
        )


@dataclass(frozen=True)
class DirectedLine:
    a: Point
    b: Point
    crossing_direction: CrossingDirection = CrossingDirection.A_TO_LEFT

    def __post_init__(self):
        object.__setattr__(self, "a", (float(self.a[0]), float(self.a[1])))
        object.__setattr__(self, "b", (float(self.b[0]), float(self.b[1])))
        object.__setattr__(self, "crossing_direction", CrossingDirection(self.crossing_direction))
        if self.a == self.b:
            raise ValueError("directed line endpoints must differ")

    def reversed(self) -> "DirectedLine":
        return DirectedLine(self.b, self.a, self.crossing_direction)

    def to_dict(self) -> dict:
        return {
            "a": [_num(v) for v in self.a],
            "b": [_num(v) for v in self.b],
            "direction": self.crossing_direction.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DirectedLine":
        return cls(tuple(d["a"]), tuple(d["b"]), CrossingDirection(d.get("direction", "AtoLeft")))


@dataclass(frozen=True)
class ZoneConfig:
    """Detection area plus the green entry line and the yellow exit line."""

    detection_area: BBox
    entry_line: DirectedLine
    exit_line: DirectedLine
    camera_id: str = "cam0"

    def __post_init__(self):
        for name, line in (("entry_line", self.entry_line), ("exit_line", self.exit_line)):
            for p in (line.a, line.b):
                if not self.detection_area.contains(p):
                    raise ValueError(f"{name} endpoint {p} lies outside the detection area")

    def to_dict(self) -> dict:
        return {
            "camera_id": self.camera_id,
            "detection_area": self.detection_area.to_dict(),
            "entry_line": self.entry_line.to_dict(),
            "exit_line": self.exit_line.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ZoneConfig":
        return cls(
            BBox.from_dict(d["detection_area"]),
            DirectedLine.from_dict(d["entry_line"]),
            DirectedLine.from_dict(d["exit_line"]),
            str(d.get("camera_id", "cam0")),
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ZoneConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def dump(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class StatsReport:
    mean_diff: float
    sample_std: float
    pearson_r: Optional[float]  # None when a series has zero variance
    p_value: Optional[float]
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("a stats report needs at least two samples")
        if self.sample_std < 0:
            raise ValueError("sample_std must be non-negative")
        if self.pearson_r is not None and abs(self.pearson_r) > 1 + 1e-12:
            raise ValueError(f"pearson_r out of range: {self.pearson_r}")

    @property
    def degenerate(self) -> bool:
        return self.pearson_r is None

    def to_dict(self) -> dict:
        return {
            "mean_diff": self.mean_diff,
            "sample_std": self.sample_std,
            "pearson_r": self.pearson_r,
            "p_value": self.p_value,
            "n": self.n,
            "degenerate": self.degenerate,
        }


def _num(v: float):
    f = float(v)
    return int(f) if f.is_integer() else f


def cross(o: Point, a: Point, b: Point) -> float:
    """z-component of (a - o) x (b - o)."""
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def line_side(p: Point, line: DirectedLine) -> int:
    """Sign of (b - a) x (p - a): +1, 0 (on the line) or -1."""
    c = cross(line.a, line.b, p)
    return int(np.sign(c))


def segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool:
    """Closed segment intersection, touching endpoints included."""
    d1 = np.sign(cross(q1, q2, p1))
    d2 = np.sign(cross(q1, q2, p2))
    d3 = np.sign(cross(p1, p2, q1))
    d4 = np.sign(cross(p1, p2, q2))
    if d1 * d2 < 0 and d3 * d4 < 0:
        return True

    def on_segment(a: Point, b: Point, p: Point) -> bool:
        return min(a[0], b[0]) <= p[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])

    return (
        (d1 == 0 and on_segment(q1, q2, p1))
        or (d2 == 0 and on_segment(q1, q2, p2))
        or (d3 == 0 and on_segment(p1, p2, q1))
        or (d4 == 0 and on_segment(p1, p2, q2))
    )


def iou(a: BBox, b: BBox) -> float:
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def footpoint(bbox: BBox) -> Point:
    """Bottom-centre of the box, the point whose path is tested against lines."""
    return (bbox.x + bbox.w / 2, bbox.y + bbox.h)
