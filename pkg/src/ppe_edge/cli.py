"""``ppe`` command line: run, simulate, evaluate, stub-detector."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from . import evaluation
from .core import ZoneConfig
from .counter import HourlyTable
from .detector import BackendUnavailable, ParseError, ScenarioConfig, generate_scenario, write_replay
from .pipeline import EXIT_BACKEND, EXIT_CONFIG, EXIT_IO, EXIT_OK, ConfigError, run, save_frames_npz
from .stub_server import BindError, serve_stub_detector

log = logging.getLogger("ppe_edge")


def cmd_run(args) -> int:
    result = run(args.config, out_dir=args.out_dir)
    m = result.metrics
    print(
        f"frames {m.frames_examined} examined, {m.frames_passed} passed, "
        f"{m.frames_discarded} discarded; in={m.events_in} out={m.events_out} "
        f"no_helmet={m.events_no_helmet}; alerts published={m.alerts_published} dropped={m.alerts_dropped}"
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        cfg = ScenarioConfig.load(args.scenario)
        zones = ZoneConfig.load(args.zones)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(str(exc), 0) from exc
    scenario = generate_scenario(cfg, zones)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_replay(out / "detections.jsonl", scenario.detections, scenario.timestamps())
    (out / "ground_truth.json").write_text(json.dumps(scenario.ground_truth.to_dict(), indent=1) + "\n")
    if args.render:
        save_frames_npz(out / "frames.npz", scenario.frames())
    n_in = sum(c.line.value == "in" for c in scenario.ground_truth.crossings)
    print(f"{cfg.duration_frames} frames, {len(cfg.actors)} actors; ground truth: "
          f"{n_in} entry and {len(scenario.ground_truth.crossings) - n_in} exit crossings -> {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if args.fixture:
        fx = evaluation.load_fixture(args.fixture)
        stats_in, stats_out = evaluation.report(fx)
    else:
        if not (args.a and args.b):
            raise ConfigError("evaluate needs --a and --b, or --fixture")
        stats_in, stats_out = evaluation.compare_tables(HourlyTable.read_csv(args.a), HourlyTable.read_csv(args.b))
    print(evaluation.format_report(stats_in, stats_out), end="")
    doc = {"in": stats_in.to_dict(), "out": stats_out.to_dict()}
    if args.json:
        Path(args.json).write_text(json.dumps(doc, indent=2) + "\n")
    else:
        print(json.dumps(doc))
    return EXIT_OK


def cmd_stub(args) -> int:
    serve_stub_detector(args.replay, args.port, args.latency_ms, args.fail_rate, args.host)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ppe", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="process a stream end to end")
    r.add_argument("--config", required=True)
    r.add_argument("--out-dir", default=None, help="directory for relative output paths")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("simulate", help="generate a scripted scenario's detections and ground truth")
    s.add_argument("--scenario", required=True)
    s.add_argument("--zones", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--render", action="store_true", help="also write rendered frames (frames.npz)")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("evaluate", help="compare two hourly count tables (a = camera, b = model)")
    e.add_argument("--a")
    e.add_argument("--b")
    e.add_argument("--fixture", help="packaged day: table1 or table2, or a fixture CSV path")
    e.add_argument("--json", help="write the JSON report here instead of stdout")
    e.set_defaults(func=cmd_evaluate)

    d = sub.add_parser("stub-detector", help="serve the remote detection contract from a replay log")
    d.add_argument("--replay", required=True)
    d.add_argument("--port", type=int, required=True)
    d.add_argument("--host", default="127.0.0.1")
    d.add_argument("--latency-ms", type=float, default=0.0)
    d.add_argument("--fail-rate", type=float, default=0.0)
    d.set_defaults(func=cmd_stub)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValueError as exc:  # ConfigError, ParseError, LengthMismatch, bad CSV
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendUnavailable as exc:
        print(f"error: detection backend unavailable: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (OSError, BindError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
