import json
from datetime import datetime, timezone

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from ppe_edge.core import BBox, CrossingDirection, DirectedLine, ZoneConfig
from ppe_edge.counter import (
    CountEvent,
    Direction,
    HourlyTable,
    LineCounter,
    day_start_ms,
    hourly_aggregate,
    observe,
    table_diff,
)
from ppe_edge.evaluation import load_fixture

UNIT = ZoneConfig(
    BBox(-20, -20, 40, 40),
    DirectedLine((0, 0), (10, 0), CrossingDirection.A_TO_LEFT),
    DirectedLine((0, 10), (10, 10), CrossingDirection.A_TO_RIGHT),
    "unit",
)


def ts(day, hh, mm):
    return int(datetime.fromisoformat(f"{day}T{hh:02d}:{mm:02d}:00+00:00").timestamp() * 1000)


def test_canonical_crossing():
    (ev,) = observe(1, True, (5, -1), (5, 1), 1000, UNIT)
    assert ev.direction is Direction.IN and ev.track_id == 1 and ev.helmeted
    assert observe(1, True, (12, -1), (12, 1), 1000, UNIT) == []


def test_wrong_direction_does_not_count():
    assert observe(1, True, (5, 1), (5, -1), 0, UNIT) == []


def test_crossing_needs_both_footpoints_in_area():
    assert observe(1, True, (5, -30), (5, 1), 0, UNIT) == []


def test_touching_the_line_then_leaving_counts_once():
    c = LineCounter(UNIT)
    path = [(5, -2), (5, 0), (5, 0), (5, 2)]
    events = [e for p, q in zip(path, path[1:]) for e in c.observe(1, True, p, q, 0)]
    assert [e.direction for e in events] == [Direction.IN]


def oscillate(counter, track_id, times, line_y=0.0, step=3.0):
    """Footpoint path crossing the horizontal line ``times`` times, ending on the far side."""
    ys = [line_y - step]
    for k in range(times):
        ys.append(line_y + step if k % 2 == 0 else line_y - step)
    pts = [(5.0, y) for y in ys]
    return [e for p, q in zip(pts, pts[1:]) for e in counter.observe(track_id, True, p, q, 0)]


def test_debounce_for_odd_oscillations():
    for k in (1, 3, 5, 7, 9):
        events = oscillate(LineCounter(UNIT), 7, k)
        assert [e.direction for e in events] == [Direction.IN], k


def test_debounce_is_per_track_and_line():
    c = LineCounter(UNIT)
    assert len(oscillate(c, 1, 5)) == 1
    assert len(oscillate(c, 2, 5)) == 1
    out = c.observe(1, True, (5, 12), (5, 8), 0)
    assert [e.direction for e in out] == [Direction.OUT]
    c.forget(1)
    assert len(oscillate(c, 1, 1)) == 1


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(-25, 25), st.floats(-25, 25)), min_size=2, max_size=60))
def test_at_most_one_event_per_track_and_line(path):
    c = LineCounter(UNIT)
    events = [e for p, q in zip(path, path[1:]) for e in c.observe(3, False, p, q, 0)]
    dirs = [e.direction for e in events]
    assert dirs.count(Direction.IN) <= 1 and dirs.count(Direction.OUT) <= 1


def test_hourly_bucketing_example():
    day = "2022-11-22"
    events = [
        CountEvent(Direction.IN, ts(day, 5, 10), 1, True),
        CountEvent(Direction.IN, ts(day, 5, 50), 2, True),
        CountEvent(Direction.OUT, ts(day, 6, 5), 3, True),
    ]
    t = hourly_aggregate(events, day_start_ms(day))
    assert (t.ins[0], t.outs[0], t.ins[1], t.outs[1]) == (2, 0, 0, 1)
    assert t.total_in == 2 and t.total_out == 1


def test_empty_table():
    t = hourly_aggregate([], day_start_ms("2022-11-22"))
    assert t.total_in == t.total_out == 0 and not t.ins.any()


def test_out_of_range_events_are_listed_and_conserved():
    day = "2022-11-22"
    rng = np.random.default_rng(0)
    start = day_start_ms(day)
    events = [
        CountEvent(Direction.IN if rng.random() < 0.5 else Direction.OUT, int(t), i, True)
        for i, t in enumerate(rng.integers(start - 3_600_000, start + 16 * 3_600_000, 500))
    ]
    t = hourly_aggregate(events, start)
    assert t.total_in + t.total_out + len(t.out_of_range) == len(events)
    assert all(not start <= e.timestamp < start + 14 * 3_600_000 for e in t.out_of_range)
    edge = hourly_aggregate([CountEvent(Direction.IN, start + 14 * 3_600_000, 0, True)], start)
    assert edge.total_in == 0 and len(edge.out_of_range) == 1


def test_table1_event_fixture_reproduces_model_row(data_dir):
    lines = (data_dir / "table1_aiml_events.jsonl").read_text().splitlines()
    events = [CountEvent.from_dict(json.loads(ln)) for ln in lines if ln.strip()]
    t = hourly_aggregate(events, day_start_ms("2022-11-22"))
    assert (t.total_in, t.total_out) == (649, 525)
    assert t == load_fixture("table1").model
    assert not t.out_of_range


def test_table2_event_fixture_reproduces_model_row(data_dir):
    lines = (data_dir / "table2_aiml_events.jsonl").read_text().splitlines()
    events = [CountEvent.from_dict(json.loads(ln)) for ln in lines if ln.strip()]
    t = hourly_aggregate(events, day_start_ms("2022-11-24"))
    assert t == load_fixture("table2").model


def test_table_diff_totals():
    t1, t2 = load_fixture("table1"), load_fixture("table2")
    d1 = table_diff(t1.camera, t1.model)
    d2 = table_diff(t2.camera, t2.model)
    assert (d1.total_in, d1.total_out) == (-87, 19)
    assert (d2.total_in, d2.total_out) == (-69, 55)
    same = table_diff(t1.camera, t1.camera)
    assert not same.ins.any() and not same.outs.any()


def test_csv_roundtrip_and_layout(data_dir):
    t = load_fixture("table1").model
    text = t.to_csv()
    assert text.splitlines()[0] == "hour,in,out"
    assert text.splitlines()[-1] == "total,649,525"
    assert HourlyTable.from_csv(text) == t
    assert HourlyTable.read_csv(data_dir / "table1_aiml_counts.csv") == t
    paper = t.to_paper_csv().splitlines()
    assert paper[1].startswith("In,11,78,87") and paper[1].endswith(",649")


def test_day_start_is_five_utc():
    assert day_start_ms("2022-11-22") == int(datetime(2022, 11, 22, 5, tzinfo=timezone.utc).timestamp() * 1000)
