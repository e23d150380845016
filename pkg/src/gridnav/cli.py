"""Command line entry point.

    gridnav run --scenario <path-or-name> [--seed N] [--headless]
                [--metrics <path>] [--map-out <path>]
    gridnav serve --scenario <path-or-name> --port <n> [--host H] [--rate R]
    gridnav sweep --lambda <start:stop:step> --B <list> [--R <m>] [--out <path>]

`run` exits 0 iff every goal was reached with zero collisions; `sweep` exits
0 once its CSV is written.  --scenario accepts a JSON file path or the name
of a shipped scenario (mapping_room, dynamic_obstacle, corner, doorway_080,
doorway_100).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .costmap import CostParams
from .mapping import save_pgm
from .runner import SimSession, emit_metrics_csv
from .scenario import BUILTIN_SCENARIOS, ScenarioError, load_builtin, load_scenario_file
from .tuning import ClearanceModel, sweep, sweep_csv


def _load(name_or_path: str):
    if name_or_path in BUILTIN_SCENARIOS:
        return load_builtin(name_or_path)
    return load_scenario_file(name_or_path)


def _parse_range(text: str) -> list[float]:
    """start:stop:step with an inclusive stop (within float epsilon)."""
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected start:stop:step") from None
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError("need step > 0 and stop >= start")
    values = []
    v = start
    while v <= stop + 1e-9:
        values.append(round(v, 12))
        v += step
    return values


def _parse_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated number list") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridnav")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario and emit metrics CSV")
    run_p.add_argument("--scenario", required=True)
    run_p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run_p.add_argument("--headless", action="store_true",
                       help="no-op marker; runs are always headless")
    run_p.add_argument("--metrics", default=None, help="CSV output path (default stdout)")
    run_p.add_argument("--map-out", default=None, help="write the final map as PGM + sidecar")

    serve_p = sub.add_parser("serve", help="run the sim with the telemetry service")
    serve_p.add_argument("--scenario", required=True)
    serve_p.add_argument("--port", type=int, required=True)
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--rate", type=float, default=1.0,
                         help="sim speed relative to wall clock")
    serve_p.add_argument("--seed", type=int, default=None)

    sweep_p = sub.add_parser("sweep", help="progression/clearance tradeoff table")
    sweep_p.add_argument("--lambda", dest="progress_decays", type=_parse_range,
                         default=_parse_range("0.01:10.01:0.05"),
                         metavar="START:STOP:STEP")
    sweep_p.add_argument("--B", dest="progress_gains", type=_parse_list,
                         default=[25.0, 100.0, 400.0], metavar="LIST")
    sweep_p.add_argument("--R", dest="radius", type=float, default=2.0)
    sweep_p.add_argument("--extent", choices=("quarter", "semi", "full"), default="semi")
    sweep_p.add_argument("--out", default="-", help="CSV path or - for stdout")
    return parser


def cmd_run(args) -> int:
    scenario = _load(args.scenario)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    session = SimSession(scenario)
    report = session.run()
    csv_bytes = emit_metrics_csv(report)
    if args.metrics:
        Path(args.metrics).write_bytes(csv_bytes)
    else:
        sys.stdout.buffer.write(csv_bytes)
    if args.map_out:
        save_pgm(session.map, args.map_out)
    if report.stuck:
        print(f"stuck: {report.stuck_reason}", file=sys.stderr)
    ok = report.all_goals_reached and report.collisions == 0
    return 0 if ok else 1


def cmd_serve(args) -> int:
    from .telemetry import serve

    scenario = _load(args.scenario)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    serve(scenario, host=args.host, port=args.port, rate=args.rate)
    return 0


def cmd_sweep(args) -> int:
    model = ClearanceModel(radius=args.radius, extent=args.extent)
    rows = sweep(CostParams(), args.progress_decays, args.progress_gains, model)
    text = sweep_csv(rows)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "serve":
            return cmd_serve(args)
        if args.command == "sweep":
            return cmd_sweep(args)
    except (ScenarioError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
