"""Directional line-crossing counts and their hourly aggregation."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from .core import DirectedLine, Point, ZoneConfig, line_side, segments_intersect

FIRST_HOUR = 5
N_BUCKETS = 14  # 05:00 .. 18:00, the last bucket closing at 19:00
HOUR_MS = 3_600_000


class Direction(str, enum.Enum):
    IN = "in"
    OUT = "out"


@dataclass(frozen=True)
class CountEvent:
    direction: Direction
    timestamp: int
    track_id: int
    helmeted: bool
    frame: int = -1

    def to_dict(self) -> dict:
        return {
            "type": "count",
            "direction": self.direction.value,
            "ts_ms": self.timestamp,
            "track_id": self.track_id,
            "helmeted": self.helmeted,
            "frame": self.frame,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CountEvent":
        return cls(
            Direction(d["direction"]),
            int(d["ts_ms"]),
            int(d["track_id"]),
            bool(d["helmeted"]),
            int(d.get("frame", -1)),
        )


@dataclass
class LineCrossState:
    last_side: int = 0
    anchor: Optional[Point] = None  # most recent footpoint strictly off the line
    armed: bool = False
    counted: bool = False


class LineCounter:
    """Emits at most one event per (track, line): lingering never double counts.

    A crossing fires when the path from the last off-line footpoint to the
    current one stays inside the detection area, intersects the line segment
    and lands on the line's target side.
    """

    def __init__(self, zones: ZoneConfig):
        self.zones = zones
        self._lines: Tuple[Tuple[Direction, DirectedLine], ...] = (
            (Direction.IN, zones.entry_line),
            (Direction.OUT, zones.exit_line),
        )
        self.state: Dict[Tuple[int, Direction], LineCrossState] = {}

    def observe(
        self,
        track_id: int,
        helmeted: bool,
        prev: Point,
        curr: Point,
        timestamp: int,
        frame: int = -1,
    ) -> List[CountEvent]:
        events = []
        area = self.zones.detection_area
        for direction, line in self._lines:
            st = self.state.setdefault((track_id, direction), LineCrossState())
            target = line.crossing_direction.target_side
            prev_side = line_side(prev, line)
            if prev_side != 0:
                st.anchor, st.last_side = prev, prev_side
            curr_side = line_side(curr, line)
            if curr_side == 0:
                continue
            st.armed = st.last_side == -target
            if (
                st.armed
                and not st.counted
                and curr_side == target
                and area.contains(st.anchor)
                and area.contains(curr)
                and segments_intersect(st.anchor, curr, line.a, line.b)
            ):
                st.counted = True
                events.append(CountEvent(direction, timestamp, track_id, helmeted, frame))
            st.anchor, st.last_side = curr, curr_side
        return events

    def forget(self, track_id: int) -> None:
        for direction, _ in self._lines:
            self.state.pop((track_id, direction), None)


def observe(
    track_id: int,
    helmeted: bool,
    footpoint_prev: Point,
    footpoint_curr: Point,
    timestamp: int,
    zones: ZoneConfig,
    counter: Optional[LineCounter] = None,
) -> List[CountEvent]:
    """Functional entry point; pass ``counter`` to keep debounce state across calls."""
    counter = counter or LineCounter(zones)
    return counter.observe(track_id, helmeted, footpoint_prev, footpoint_curr, timestamp)


def day_start_ms(day: Union[date, datetime, str], tz: timezone = timezone.utc) -> int:
    if isinstance(day, str):
        day = date.fromisoformat(day)
    if isinstance(day, datetime):
        day = day.date()
    start = datetime(day.year, day.month, day.day, FIRST_HOUR, tzinfo=tz)
    return int(start.timestamp() * 1000)


@dataclass
class HourlyTable:
    ins: np.ndarray = field(default_factory=lambda: np.zeros(N_BUCKETS, dtype=np.int64))
    outs: np.ndarray = field(default_factory=lambda: np.zeros(N_BUCKETS, dtype=np.int64))
    out_of_range: List[CountEvent] = field(default_factory=list)

    def __post_init__(self):
        self.ins = np.asarray(self.ins, dtype=np.int64)
        self.outs = np.asarray(self.outs, dtype=np.int64)
        if self.ins.shape != (N_BUCKETS,) or self.outs.shape != (N_BUCKETS,):
            raise ValueError(f"hourly tables have exactly {N_BUCKETS} buckets")

    @staticmethod
    def labels() -> List[str]:
        return [f"{h:02d}:00" for h in range(FIRST_HOUR, FIRST_HOUR + N_BUCKETS)]

    @property
    def total_in(self) -> int:
        return int(self.ins.sum())

    @property
    def total_out(self) -> int:
        return int(self.outs.sum())

    def __eq__(self, other):
        if not isinstance(other, HourlyTable):
            return NotImplemented
        return np.array_equal(self.ins, other.ins) and np.array_equal(self.outs, other.outs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["hour", "in", "out"])
        for label, i, o in zip(self.labels(), self.ins, self.outs):
            w.writerow([label, int(i), int(o)])
        w.writerow(["total", self.total_in, self.total_out])
        return buf.getvalue()

    def to_paper_csv(self) -> str:
        """Hours as columns, like the published tables."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["series", *self.labels(), "Total"])
        w.writerow(["In", *(int(v) for v in self.ins), self.total_in])
        w.writerow(["Out", *(int(v) for v in self.outs), self.total_out])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "HourlyTable":
        rows = list(csv.DictReader(io.StringIO(text)))
        body = [r for r in rows if r["hour"] != "total"]
        if [r["hour"] for r in body] != cls.labels():
            raise ValueError("counts CSV does not have the 05:00-18:00 bucket structure")
        table = cls([int(r["in"]) for r in body], [int(r["out"]) for r in body])
        totals = [r for r in rows if r["hour"] == "total"]
        if totals and (int(totals[0]["in"]), int(totals[0]["out"])) != (table.total_in, table.total_out):
            raise ValueError("counts CSV total row disagrees with its buckets")
        return table

    @classmethod
    def read_csv(cls, path: Union[str, Path]) -> "HourlyTable":
        return cls.from_csv(Path(path).read_text())


def hourly_aggregate(
    events: Iterable[CountEvent], day_start: int, day_end: Optional[int] = None
) -> HourlyTable:
    """Bucket events by the hour they fall in; ``day_start`` is 05:00 in ms.

    Events outside ``[day_start, day_end)`` are kept in ``out_of_range``.
    """
    if day_end is None:
        day_end = day_start + N_BUCKETS * HOUR_MS
    if day_end - day_start != N_BUCKETS * HOUR_MS:
        raise ValueError("the counting day spans 05:00-19:00 (14 hourly buckets)")
    table = HourlyTable()
    for ev in events:
        if not day_start <= ev.timestamp < day_end:
            table.out_of_range.append(ev)
            continue
        bucket = (ev.timestamp - day_start) // HOUR_MS
        if ev.direction is Direction.IN:
            table.ins[bucket] += 1
        else:
            table.outs[bucket] += 1
    return table


@dataclass(frozen=True)
class TableDiff:
    ins: np.ndarray
    outs: np.ndarray

    @property
    def total_in(self) -> int:
        return int(self.ins.sum())

    @property
    def total_out(self) -> int:
        return int(self.outs.sum())


def table_diff(a: HourlyTable, b: HourlyTable) -> TableDiff:
    """Per-bucket ``a - b`` for each direction."""
    return TableDiff(a.ins - b.ins, a.outs - b.outs)
