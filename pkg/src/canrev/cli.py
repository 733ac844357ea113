"""Find brake, accelerator and steering channels in CAN recordings.

Subcommands::

    canrev correlate --can d.log --imu imu.csv --gps gps.csv --action decelerate
    canrev discover  ... --cal-can cal.csv --cal-imu cal_imu.csv
    canrev synth     --builtin stop-and-go --seed 7 --out dir/
    canrev analyze   --drive dir/ --brake-cal bdir/ --steer-cal sdir/ --out-dir reports/

Exit codes: 0 success, 1 analysis failure, 2 usage or input failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import report
from .ingest import IngestError, load_recording, load_recording_dir
from .model import Action, CanRevError, RecordingKind
from .pipeline import (
    AnalysisConfig,
    AnalysisError,
    DiscoveryConfig,
    discover_controls,
    rate_of_change_correlation,
    run_full_analysis,
)
from .signals import PreprocessConfig
from .synth import BUILTINS, ScenarioError, builtin_scenario, scenario_from_dict, simulate, write_recording

log = logging.getLogger("canrev")

EXIT_OK, EXIT_ANALYSIS, EXIT_USAGE = 0, 1, 2
ACTIONS = [a.value for a in Action]


class UsageError(Exception):
    pass


def _add_analysis_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--top-n", type=int, default=25, help="rows kept in the correlation table")
    p.add_argument("--smoothing-window", type=int, default=25, help="moving-average width in samples (odd)")
    p.add_argument("--speed-threshold", type=float, default=0.1, help="m/s above which the vehicle counts as moving")
    p.add_argument("--grid-step", type=float, default=0.01, help="resampling step in seconds")
    p.add_argument("--no-gps-mask", action="store_true", help="correlate over all samples, ignoring GPS")
    p.add_argument("--workers", type=int, default=None, help="threads for the channel sweep")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None, help="report file (default: stdout)")
    p.add_argument("--plot-dir", default=None, help="also render PNG figures into this directory")


def _add_drive_inputs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--can", required=True, help="drive CAN log (candump or CSV)")
    p.add_argument("--imu", required=True, help="drive IMU CSV")
    p.add_argument("--gps", default=None, help="drive GPS CSV (required unless --no-gps-mask)")
    p.add_argument("--action", choices=ACTIONS, default=Action.DECELERATE.value)


def _add_discovery_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--min-unique", type=int, default=16)
    p.add_argument("--min-correlation", type=float, default=0.5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="canrev", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("correlate", help="rank CAN channels by correlation with an IMU action")
    _add_drive_inputs(p)
    _add_analysis_options(p)

    p = sub.add_parser("discover", help="correlate, then rank by calibration smoothness")
    _add_drive_inputs(p)
    p.add_argument("--cal-can", required=True, help="calibration CAN log")
    p.add_argument("--cal-imu", required=True, help="calibration IMU CSV")
    p.add_argument("--cal-gps", default=None, help="calibration GPS CSV (optional)")
    _add_analysis_options(p)
    _add_discovery_options(p)

    p = sub.add_parser("synth", help="write a synthetic recording with ground truth")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--builtin", help=f"one of: {', '.join(BUILTINS)}")
    src.add_argument("--scenario", help="scenario JSON file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("analyze", help="full analysis of a drive directory plus calibrations")
    p.add_argument("--drive", required=True, help="directory with can.csv, imu.csv, gps.csv")
    p.add_argument("--brake-cal", default=None)
    p.add_argument("--accel-cal", default=None)
    p.add_argument("--steer-cal", default=None)
    p.add_argument("--out-dir", required=True)
    _add_analysis_options(p)
    _add_discovery_options(p)
    return parser


def _config(args) -> AnalysisConfig:
    try:
        pre = PreprocessConfig(args.smoothing_window, args.speed_threshold, args.grid_step)
        disc = DiscoveryConfig(
            args.top_n, getattr(args, "min_unique", 16), getattr(args, "min_correlation", 0.5)
        )
        return AnalysisConfig(pre, disc, not args.no_gps_mask, args.top_n, args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _check_paths(*paths) -> None:
    for p in paths:
        if p is not None and not os.path.isfile(p):
            raise UsageError(f"no such file: {p}")


def _load_drive(args, cfg: AnalysisConfig):
    if cfg.use_gps_mask and args.gps is None:
        raise UsageError("--gps is required unless --no-gps-mask is given")
    _check_paths(args.can, args.imu, args.gps)
    gps = args.gps if cfg.use_gps_mask else None
    drive, stats = load_recording(args.can, args.imu, gps, RecordingKind.DRIVE, cfg.use_gps_mask)
    log.info("drive: %d frames, %d IMU, %d GPS, %d dropped",
             stats.frames_read, stats.imu_read, stats.gps_read, stats.dropped_lines)
    return drive


def _emit(args, text_csv: str, data_json: dict) -> None:
    text = report.dumps_json(data_json) if args.format == "json" else text_csv
    report.write_text(text, args.out)


def cmd_correlate(args) -> int:
    cfg = _config(args)
    drive = _load_drive(args, cfg)
    table = rate_of_change_correlation(drive, args.action, cfg)
    _emit(args, report.correlation_csv(table), report.correlation_json(table))
    if args.plot_dir:
        from .plotting import render_report_figures

        render_report_figures(args.plot_dir, table, drive, cfg)
    return EXIT_OK


def cmd_discover(args) -> int:
    cfg = _config(args)
    action = Action(args.action)
    _check_paths(args.cal_can, args.cal_imu, args.cal_gps)
    drive = _load_drive(args, cfg)
    cal, _ = load_recording(args.cal_can, args.cal_imu, args.cal_gps, action.calibration_kind)
    table = rate_of_change_correlation(drive, action, cfg)
    rows = discover_controls(table, cal, cfg.discovery)
    _emit(args, report.discovery_csv(rows, table), report.discovery_json(rows, table))
    if args.plot_dir:
        from .plotting import render_report_figures

        render_report_figures(args.plot_dir, table, drive, cfg, cal, rows)
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        if args.builtin:
            scenario = builtin_scenario(args.builtin, args.seed or 0)
        else:
            _check_paths(args.scenario)
            with open(args.scenario, encoding="utf-8") as fh:
                data = json.load(fh)
            if args.seed is not None:
                data["seed"] = args.seed
            scenario = scenario_from_dict(data)
    except (ScenarioError, json.JSONDecodeError) as exc:
        raise UsageError(str(exc)) from exc
    recording, truth = simulate(scenario)
    for path in write_recording(recording, args.out, truth, scenario):
        log.info("wrote %s", path)
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _config(args)
    if not os.path.isdir(args.drive):
        raise UsageError(f"no such directory: {args.drive}")
    drive, _ = load_recording_dir(args.drive, RecordingKind.DRIVE, cfg.use_gps_mask)
    cals = []
    for directory, kind in (
        (args.brake_cal, RecordingKind.CALIBRATION_BRAKE),
        (args.accel_cal, RecordingKind.CALIBRATION_ACCELERATOR),
        (args.steer_cal, RecordingKind.CALIBRATION_STEERING),
    ):
        if directory is not None:
            if not os.path.isdir(directory):
                raise UsageError(f"no such directory: {directory}")
            cals.append(load_recording_dir(directory, kind)[0])
    reports = run_full_analysis(drive, cals, cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    by_kind = {c.kind: c for c in cals}
    failed = False
    for action, rep in reports.items():
        stem = os.path.join(args.out_dir, action.value)
        if rep.error:
            log.error("%s: %s", action.value, rep.error)
            failed = failed or rep.table is None
        if args.format == "json":
            report.write_text(report.dumps_json(report.action_report_json(rep)), stem + ".json")
        elif rep.table is not None:
            report.write_text(report.correlation_csv(rep.table), stem + "_correlation.csv")
            if rep.discovery is not None:
                report.write_text(report.discovery_csv(rep.discovery, rep.table), stem + "_discovery.csv")
        if args.plot_dir and rep.table is not None:
            from .plotting import render_report_figures

            render_report_figures(
                args.plot_dir, rep.table, drive, cfg,
                by_kind.get(action.calibration_kind), rep.discovery or (),
            )
    return EXIT_ANALYSIS if failed else EXIT_OK


COMMANDS = {
    "correlate": cmd_correlate,
    "discover": cmd_discover,
    "synth": cmd_synth,
    "analyze": cmd_analyze,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"canrev: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IngestError, ScenarioError) as exc:
        print(f"canrev: input error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AnalysisError as exc:
        print(f"canrev: analysis failed: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except CanRevError as exc:
        print(f"canrev: analysis failed: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
