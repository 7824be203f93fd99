"""Command-line entry point: simulate, transmit, analyze, compare, export.

Exit codes: 0 clean, 2 usage/input error, 3 critical events detected.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import analysis, figures
from .core_model import SessionLog, serialize_record
from .errors import TruggyDaqError
from .link import ChannelConfig, send_records
from .simulator import Scenario, Track, default_track, run_scenario

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CRITICAL = 3


class ConfigError(TruggyDaqError):
    pass


def parse_config(path) -> dict:
    """Parse a flat 'dotted.key = value' configuration file."""
    cfg = {}
    try:
        with open(path) as f:
            for ln, line in enumerate(f, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                for sep in ("=", ":"):
                    if sep in line:
                        key, _, val = line.partition(sep)
                        cfg[key.strip()] = val.strip()
                        break
                else:
                    raise ConfigError("%s:%d: expected 'key = value'" % (path, ln))
    except OSError as e:
        raise ConfigError("cannot read config %s: %s" % (path, e))
    return cfg


def _get(cfg, key, cast, default):
    if key not in cfg:
        return default
    try:
        return cast(cfg[key])
    except ValueError:
        raise ConfigError("bad value for %s: %r" % (key, cfg[key]))


def scenario_from_config(cfg: dict, seed_override=None) -> Scenario:
    name = cfg.get("scenario.name")
    if not name:
        raise ConfigError("config must set scenario.name")
    seed = seed_override if seed_override is not None else \
        _get(cfg, "scenario.seed", int, 0)
    try:
        return Scenario(
            name=name,
            laps=_get(cfg, "scenario.laps", int, 3),
            tick_rate_hz=_get(cfg, "scenario.tick_rate_hz", int, 10),
            seed=seed,
            target_speed_mps=_get(cfg, "scenario.target_speed_mps", float, None),
            duration_s=_get(cfg, "scenario.duration_s", float, None),
            failure_onset_s=_get(cfg, "failure.onset_s", float, 30.0),
            crash_time_s=_get(cfg, "crash.time_s", float, 20.0),
            crash_tumbles=_get(cfg, "crash.tumbles", int, 2),
            gps_origin_lat=_get(cfg, "gps.origin_lat", float, 51.0),
            gps_origin_lon=_get(cfg, "gps.origin_lon", float, 4.2),
            gps_sigma_m=_get(cfg, "noise.gps_sigma_m", float, 0.5),
            gps_dropout_prob=_get(cfg, "noise.gps_dropout_prob", float, 0.0),
        )
    except ValueError as e:
        raise ConfigError(str(e))


def track_from_config(cfg: dict) -> Track:
    path = cfg.get("track.file")
    if path is None:
        return default_track()
    if not os.path.exists(path):
        raise ConfigError("track file not found: %s" % path)
    return Track.load(path)


def _load_log(path) -> SessionLog:
    if not os.path.exists(path):
        raise ConfigError("input log not found: %s" % path)
    return SessionLog.read(path)


def _lap_boundaries(log, cfg):
    """Start-line crossings, when track/origin info is available."""
    track = track_from_config(cfg or {})
    x, y, tx, ty = track.start_line()
    line = analysis.StartLine(x, y, tx, ty)
    lat = _get(cfg or {}, "gps.origin_lat", float, 51.0)
    lon = _get(cfg or {}, "gps.origin_lon", float, 4.2)
    try:
        return analysis.lap_segmentation(log.records, line, lat, lon)
    except analysis.NoGps:
        return []


# ---------------------------------------------------------- subcommands

def cmd_simulate(args) -> int:
    cfg = parse_config(args.config)
    scenario = scenario_from_config(cfg, args.seed)
    track = track_from_config(cfg)
    run = run_scenario(scenario, track)
    os.makedirs(args.out, exist_ok=True)
    log_path = os.path.join(args.out, "session.bin")
    truth_path = os.path.join(args.out, "truth.csv")
    run.log.write(log_path)
    run.write_truth_csv(truth_path)
    summary = analysis.summarize(run.log, lap_count=len(run.lap_ticks))
    print("wrote %s (%d records) and %s" % (log_path, len(run.log), truth_path))
    for line in summary.lines():
        print(line)
    return EXIT_OK


def cmd_transmit(args) -> int:
    log = _load_log(args.log)
    ch = ChannelConfig(
        drop_prob=args.drop_prob,
        duplicate_prob=args.duplicate_prob,
        reorder_window=args.reorder,
        corrupt_prob=args.corrupt_prob,
        seed=args.seed if args.seed is not None else 0,
    )
    records = [(r.seq, serialize_record(r)) for r in log.records]
    delivered, stats = send_records(records, ch)
    os.makedirs(args.out, exist_ok=True)
    out_log = SessionLog(scenario_name=log.scenario_name,
                         tick_rate_hz=log.tick_rate_hz)
    from .core_model import deserialize_record
    for d in delivered:
        out_log.records.append(deserialize_record(d.data))
    out_path = os.path.join(args.out, "received.bin")
    out_log.write(out_path)
    stats_path = os.path.join(args.out, "link_stats." +
                              ("csv" if args.format == "csv" else "txt"))
    items = stats.as_dict()
    with open(stats_path, "w") as f:
        if args.format == "csv":
            f.write(",".join(items) + "\n")
            f.write(",".join(str(v) for v in items.values()) + "\n")
        else:
            for k, v in items.items():
                f.write("%s: %s\n" % (k, v))
    print("wrote %s (%d records) and %s" % (out_path, len(out_log), stats_path))
    for k, v in items.items():
        print("%s: %s" % (k, v))
    return EXIT_OK


def cmd_analyze(args) -> int:
    log = _load_log(args.log)
    cfg = parse_config(args.config) if args.config else {}
    events = analysis.run_all_detectors(log.records)
    boundaries = _lap_boundaries(log, cfg)
    summary = analysis.summarize(log, lap_count=len(boundaries))
    os.makedirs(args.out, exist_ok=True)
    analysis.export_csv(log, os.path.join(args.out, "series.csv"),
                        lap_boundaries=boundaries)
    with open(os.path.join(args.out, "events.csv"), "w") as f:
        f.write("kind,t_ms,detail\n")
        for e in events:
            f.write("%s,%d,%s\n" % (e.kind, e.t_ms,
                                    ";".join("%s=%s" % kv for kv in e.detail.items())))
    with open(os.path.join(args.out, "summary.txt"), "w") as f:
        f.write("\n".join(summary.lines()) + "\n")
    if not args.no_figures:
        figures.render_analysis_figures(log.records, args.out)
    for line in summary.lines():
        print(line)
    if events:
        print("events:")
        for e in events:
            print("  %-16s t=%.1fs %s" % (e.kind, e.t_ms / 1000.0, e.detail))
    else:
        print("events: none")
    critical = [e for e in events if e.kind in analysis.CRITICAL_KINDS]
    return EXIT_CRITICAL if critical else EXIT_OK


def cmd_compare(args) -> int:
    log_a = _load_log(args.log_a)
    log_b = _load_log(args.log_b)
    sa, sb, deltas = analysis.compare_runs(log_a, log_b)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "compare." +
                        ("csv" if args.format == "csv" else "txt"))
    with open(path, "w") as f:
        if args.format == "csv":
            f.write("metric,delta\n")
            for k, v in deltas.items():
                f.write("%s,%.6f\n" % (k, v))
        else:
            for k, v in deltas.items():
                f.write("%-24s %+.4f\n" % (k, v))
    if not args.no_figures:
        figures.render_compare_figure(sa, sb, args.out)
    print("deltas (first minus second):")
    for k, v in deltas.items():
        print("  %-24s %+.4f" % (k, v))
    return EXIT_OK


def cmd_export(args) -> int:
    log = _load_log(args.log)
    cfg = parse_config(args.config) if args.config else {}
    boundaries = _lap_boundaries(log, cfg)
    out = args.out
    if out.endswith(".csv"):
        out_dir = os.path.dirname(out) or "."
        csv_path = out
    else:
        out_dir = out
        csv_path = os.path.join(out, "series.csv")
    os.makedirs(out_dir, exist_ok=True)
    analysis.export_csv(log, csv_path, wheel_diameter_m=args.wheel_diameter,
                        lap_boundaries=boundaries)
    if not args.no_figures:
        figures.render_analysis_figures(log.records, out_dir)
    print("wrote %s (%d rows)" % (csv_path, len(log)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="truggydaq",
                                description="RC telemetry simulator and analyzer")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario, write log + ground truth")
    sim.add_argument("--config", required=True)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--out", default=".")
    sim.set_defaults(func=cmd_simulate)

    tx = sub.add_parser("transmit", help="replay a log through the lossy link")
    tx.add_argument("log")
    tx.add_argument("--drop-prob", type=float, default=0.0)
    tx.add_argument("--duplicate-prob", type=float, default=0.0)
    tx.add_argument("--corrupt-prob", type=float, default=0.0)
    tx.add_argument("--reorder", type=int, default=0)
    tx.add_argument("--seed", type=int, default=None)
    tx.add_argument("--out", default=".")
    tx.add_argument("--format", choices=("text", "csv"), default="text")
    tx.set_defaults(func=cmd_transmit)

    an = sub.add_parser("analyze", help="run all detectors over a log")
    an.add_argument("log")
    an.add_argument("--config", default=None)
    an.add_argument("--out", default=".")
    an.add_argument("--format", choices=("text", "csv"), default="text")
    an.add_argument("--no-figures", action="store_true")
    an.set_defaults(func=cmd_analyze)

    cp = sub.add_parser("compare", help="delta report between two logs")
    cp.add_argument("log_a")
    cp.add_argument("log_b")
    cp.add_argument("--out", default=".")
    cp.add_argument("--format", choices=("text", "csv"), default="text")
    cp.add_argument("--no-figures", action="store_true")
    cp.set_defaults(func=cmd_compare)

    ex = sub.add_parser("export", help="CSV of the derived per-tick series")
    ex.add_argument("log")
    ex.add_argument("--config", default=None)
    ex.add_argument("--out", default=".")
    ex.add_argument("--wheel-diameter", type=float, default=0.1)
    ex.add_argument("--no-figures", action="store_true")
    ex.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TruggyDaqError as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
