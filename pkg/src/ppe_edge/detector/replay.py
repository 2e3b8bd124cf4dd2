"""Detection logs: one JSON object per line, keyed by frame index."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

from ..core import Detection, Frame
from .base import (
    Capability,
    DetectorBackend,
    DuplicateFrameIndex,
    ParseError,
    ReplayExhausted,
    clip_detections,
)


class ReplayBackend(DetectorBackend):
    """Serves logged detections; a frame missing from the log yields ``[]``
    unless ``strict`` is set and the frame lies past the end of the log."""

    def __init__(
        self,
        records: Mapping[int, List[Detection]],
        timestamps: Optional[Mapping[int, int]] = None,
        strict: bool = False,
    ):
        self.records = dict(records)
        self.timestamps = dict(timestamps or {})
        self.strict = strict
        self.capability = Capability(
            "replay", any(d.feature is not None for ds in self.records.values() for d in ds)
        )

    @property
    def last_index(self) -> Optional[int]:
        return max(self.records) if self.records else None

    def detections_at(self, index: int) -> List[Detection]:
        if self.strict and (self.last_index is None or index > self.last_index):
            raise ReplayExhausted(f"frame {index} is past the end of the replay log")
        return list(self.records.get(index, ()))

    def detect(self, frame: Frame) -> List[Detection]:
        return clip_detections(self.detections_at(frame.index), frame.width, frame.height)


def parse_replay(lines: Iterable[str]) -> Tuple[Dict[int, List[Detection]], Dict[int, int]]:
    records: Dict[int, List[Detection]] = {}
    timestamps: Dict[int, int] = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            index = int(obj["frame"])
            dets = [Detection.from_dict(d) for d in obj.get("detections", [])]
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(str(exc), lineno) from exc
        if index in records:
            raise DuplicateFrameIndex(f"frame {index} appears twice (line {lineno})")
        records[index] = dets
        if "ts_ms" in obj:
            timestamps[index] = int(obj["ts_ms"])
    return records, timestamps


def load_replay(path: Union[str, Path], strict: bool = False) -> ReplayBackend:
    with open(path) as fh:
        records, timestamps = parse_replay(fh)
    return ReplayBackend(records, timestamps, strict=strict)


def dump_replay_line(index: int, detections: Iterable[Detection], ts_ms: Optional[int] = None) -> str:
    obj = {"frame": int(index)}
    if ts_ms is not None:
        obj["ts_ms"] = int(ts_ms)
    obj["detections"] = [d.to_dict() for d in detections]
    return json.dumps(obj, separators=(",", ":"))


def write_replay(
    path: Union[str, Path],
    records: Mapping[int, Iterable[Detection]],
    timestamps: Optional[Mapping[int, int]] = None,
) -> None:
    timestamps = timestamps or {}
    with open(path, "w") as fh:
        for index in sorted(records):
            fh.write(dump_replay_line(index, records[index], timestamps.get(index)) + "\n")
