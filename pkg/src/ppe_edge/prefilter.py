"""Frame gating ahead of detection: brightness threshold, then frame differencing."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Tuple

import numpy as np

from .core import Frame


class Gate(str, enum.Enum):
    BRIGHTNESS = "brightness"
    MOTION = "motion"


class Decision(enum.Enum):
    PASS = "pass"
    DISCARD = "discard"


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class PrefilterConfig:
    brightness_threshold: float = 20.0
    pixel_diff_threshold: float = 25.0
    motion_area_fraction: float = 0.01
    enabled_gates: frozenset = frozenset({Gate.BRIGHTNESS, Gate.MOTION})

    def __post_init__(self):
        object.__setattr__(self, "enabled_gates", frozenset(Gate(g) for g in self.enabled_gates))
        if not 0 <= self.brightness_threshold <= 255:
            raise ValueError("brightness_threshold must be in [0, 255]")
        if not 0 <= self.pixel_diff_threshold <= 255:
            raise ValueError("pixel_diff_threshold must be in [0, 255]")
        if not 0 <= self.motion_area_fraction <= 1:
            raise ValueError("motion_area_fraction must be in [0, 1]")

    @classmethod
    def disabled(cls) -> "PrefilterConfig":
        return cls(enabled_gates=frozenset())

    @classmethod
    def from_dict(cls, d: dict) -> "PrefilterConfig":
        d = dict(d)
        if "enabled_gates" in d:
            d["enabled_gates"] = frozenset(d["enabled_gates"])
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "brightness_threshold": self.brightness_threshold,
            "pixel_diff_threshold": self.pixel_diff_threshold,
            "motion_area_fraction": self.motion_area_fraction,
            "enabled_gates": sorted(g.value for g in self.enabled_gates),
        }


@dataclass
class PrefilterMetrics:
    examined: int = 0
    passed: int = 0
    discarded_brightness: int = 0
    discarded_motion: int = 0

    @property
    def discarded(self) -> int:
        return self.discarded_brightness + self.discarded_motion


def brightness_gate(frame: Frame, cfg: PrefilterConfig) -> Decision:
    mean = float(frame.pixels.mean())
    return Decision.PASS if mean >= cfg.brightness_threshold else Decision.DISCARD


def motion_gate(prev: Frame, curr: Frame, cfg: PrefilterConfig) -> Decision:
    if prev.pixels.shape != curr.pixels.shape:
        raise DimensionMismatch(
            f"frame {curr.index} is {curr.width}x{curr.height}, "
            f"reference frame {prev.index} is {prev.width}x{prev.height}"
        )
    diff = np.abs(curr.pixels.astype(np.int16) - prev.pixels.astype(np.int16))
    changed = np.count_nonzero(diff > cfg.pixel_diff_threshold)
    fraction = changed / diff.size
    return Decision.PASS if fraction > cfg.motion_area_fraction else Decision.DISCARD


class Prefilter:
    """Stateful gate for a single stream.

    The motion reference is the previously *examined* frame, so a slow walker
    is compared against the last frame rather than a stale passed one.
    """

    def __init__(self, cfg: Optional[PrefilterConfig] = None):
        self.cfg = cfg or PrefilterConfig()
        self.metrics = PrefilterMetrics()
        self._prev: Optional[Frame] = None

    def admit(self, frame: Frame) -> bool:
        cfg = self.cfg
        self.metrics.examined += 1
        prev, self._prev = self._prev, frame
        if Gate.BRIGHTNESS in cfg.enabled_gates and brightness_gate(frame, cfg) is Decision.DISCARD:
            self.metrics.discarded_brightness += 1
            return False
        if (
            Gate.MOTION in cfg.enabled_gates
            and prev is not None
            and motion_gate(prev, frame, cfg) is Decision.DISCARD
        ):
            self.metrics.discarded_motion += 1
            return False
        self.metrics.passed += 1
        return True

    def filter(self, frames: Iterable[Frame]) -> Iterator[Frame]:
        for frame in frames:
            if self.admit(frame):
                yield frame


def filter_stream(
    frames: Iterable[Frame], cfg: Optional[PrefilterConfig] = None
) -> Tuple[Iterator[Frame], PrefilterMetrics]:
    """Lazily filter ``frames``; the metrics object fills in as the iterator is consumed."""
    pf = Prefilter(cfg)
    return pf.filter(frames), pf.metrics
