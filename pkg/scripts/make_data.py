"""Regenerate the packaged scenarios, run configs, replay log and event fixtures.

    python scripts/make_data.py
"""

import json
from pathlib import Path

from ppe_edge.core import BBox, CrossingDirection, DirectedLine, ZoneConfig
from ppe_edge.counter import HOUR_MS, CountEvent, Direction, day_start_ms
from ppe_edge.detector import (
    NoiseConfig,
    ScenarioConfig,
    generate_scenario,
    late_helmet_walker,
    lingering_walker,
    random_scenario,
    walker,
    write_replay,
)
from ppe_edge.evaluation import load_fixture

DATA = Path(__file__).resolve().parents[1] / "src" / "ppe_edge" / "data"

ZONES = ZoneConfig(
    BBox(10, 40, 300, 160),
    DirectedLine((10, 140), (310, 140), CrossingDirection.A_TO_LEFT),  # green, walking down
    DirectedLine((10, 100), (310, 100), CrossingDirection.A_TO_RIGHT),  # yellow, walking up
    camera_id="gate1",
)

# footpoint-visible rendered heads: 24 px boxes move ~50-100 changed pixels per frame
RENDERED_PREFILTER = {"motion_area_fraction": 0.0005}


def scenarios():
    yield "single_entry", ScenarioConfig(1, 90, (walker(0, 160, 5, 10, 230, speed=3.0),))
    yield "lingering", ScenarioConfig(2, 200, (lingering_walker(0, 160, 5, line_y=140, crossings=5),))
    yield "late_helmet", ScenarioConfig(3, 100, (late_helmet_walker(0, 160, 5, helmet_on_y=185),))
    yield "zero_actor", ScenarioConfig(4, 50, ())
    slow = (
        walker(0, 60, 5, 10, 230, speed=1.5),
        walker(1, 140, 20, 230, 10, speed=2.0),
        walker(2, 220, 40, 10, 230, speed=2.5, helmeted=False),
        walker(3, 280, 60, 230, 10, speed=3.0),
        lingering_walker(4, 100, 80, line_y=140, crossings=3, speed=2.0),
        walker(5, 180, 150, 10, 230, speed=1.2),
    )
    yield "slow_walkers", ScenarioConfig(5, max(a.last_frame for a in slow) + 10, slow)
    idle = tuple(
        walker(i, 80 + 50 * i, start, *(10, 230) if i % 2 == 0 else (230, 10), speed=3.0)
        for i, start in enumerate((200, 900, 1700, 2500))
    )
    yield "idle_periods", ScenarioConfig(6, 3000, idle)
    yield "noisy_crowd", random_scenario(7, 24, NoiseConfig(0.1, 0.0, 2.0))


def run_config(name, rendered=True):
    return {
        "seed": 11,
        "source": {"scenario": f"../scenarios/{name}.json"},
        "backend": {"synthetic": {}},
        "prefilter": RENDERED_PREFILTER if rendered else {"enabled_gates": []},
        "zones": "../gate1_zones.json",
        "alerting": {"memory": {}},
        "outputs": {
            "counts_csv": f"{name}/counts.csv",
            "events_jsonl": f"{name}/events.jsonl",
            "metrics_json": f"{name}/metrics.json",
        },
    }


def table_events(name):
    fx = load_fixture(name)
    start = day_start_ms(fx.name and {"table1": "2022-11-22", "table2": "2022-11-24"}[name])
    events, tid = [], 0
    for direction, key in ((Direction.IN, "AI&ML In"), (Direction.OUT, "AI&ML Out")):
        for hour, count in enumerate(fx.rows[key]):
            for k in range(count):
                ts = start + hour * HOUR_MS + int((k + 0.5) * HOUR_MS / count)
                tid += 1
                events.append(CountEvent(direction, ts, tid, True))
    events.sort(key=lambda e: (e.timestamp, e.track_id))
    return events


def main():
    (DATA / "scenarios").mkdir(parents=True, exist_ok=True)
    (DATA / "configs").mkdir(parents=True, exist_ok=True)
    ZONES.dump(DATA / "gate1_zones.json")
    for name, cfg in scenarios():
        cfg.dump(DATA / "scenarios" / f"{name}.json")
        cfg_doc = run_config(name, rendered=name != "noisy_crowd")
        (DATA / "configs" / f"{name}.json").write_text(json.dumps(cfg_doc, indent=2) + "\n")

    crowd = generate_scenario(ScenarioConfig.load(DATA / "scenarios" / "noisy_crowd.json"), ZONES)
    write_replay(DATA / "noisy_crowd_detections.jsonl", crowd.detections, crowd.timestamps())
    replay_cfg = {
        "source": {"detections_only": "../noisy_crowd_detections.jsonl"},
        "backend": {"replay": "../noisy_crowd_detections.jsonl"},
        "zones": "../gate1_zones.json",
        "alerting": {"memory": {}},
        "outputs": {"counts_csv": "replay/counts.csv", "events_jsonl": "replay/events.jsonl"},
    }
    (DATA / "configs" / "replay_local.json").write_text(json.dumps(replay_cfg, indent=2) + "\n")
    remote_cfg = dict(replay_cfg)
    remote_cfg["backend"] = {"remote": {"endpoint": "http://127.0.0.1:8765", "timeout_ms": 2000, "max_inflight": 8}}
    remote_cfg["outputs"] = {"counts_csv": "remote/counts.csv", "events_jsonl": "remote/events.jsonl"}
    (DATA / "configs" / "remote_stub.json").write_text(json.dumps(remote_cfg, indent=2) + "\n")

    for name in ("table1", "table2"):
        with open(DATA / f"{name}_aiml_events.jsonl", "w") as fh:
            for ev in table_events(name):
                fh.write(json.dumps(ev.to_dict(), separators=(",", ":")) + "\n")
        fx = load_fixture(name)
        (DATA / f"{name}_dahua_counts.csv").write_text(fx.camera.to_csv())
        (DATA / f"{name}_aiml_counts.csv").write_text(fx.model.to_csv())


if __name__ == "__main__":
    main()
