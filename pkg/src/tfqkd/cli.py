"""Command-line entry point.

Exit status: 0 on success, 2 on invalid input (config, files, arguments),
3 when ``keyrate`` finds no positive key.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import SCHEMA, ConfigError, RunConfig, _coerce, build_objects
from .keyrate import CountTable, FailureProbs, key_rate
from .refdata import replay
from .recovery import read_estimates, recover_stream, write_estimates
from .scenarios import SCENARIOS, write_csv
from .sifting import SlotTable, build_count_table, tally_er
from .synth import EventStream, simulate_encoded_run, simulate_run
from .timetags import read_timetags, write_timetags

EXIT_INVALID = 2
EXIT_NO_KEY = 3


def load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    over: dict[str, dict[str, object]] = {}
    for item in args.set or ():
        key, sep, raw = item.partition("=")
        sec, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        if name not in SCHEMA.get(sec, {}):
            raise ConfigError(f"unknown key {name!r} in [{sec}]")
        over.setdefault(sec, {})[name] = _coerce(SCHEMA[sec][name][0], raw.strip(), f"--set {key}")
    if args.seed is not None:
        over.setdefault("run", {})["seed"] = args.seed
    if over:
        cfg = cfg.with_overrides(**over)
    build_objects(cfg)
    return cfg


def with_schedule(stream: EventStream, cfg: RunConfig) -> EventStream:
    """Attach the configured frame schedule to a stream read from disk.

    The frame count is inferred from the last click: a run of ``n`` frames
    ends with the R-frame that starts at ``n`` periods.
    """
    sched = cfg.schedule()
    n = int(stream.times_ps[-1] // sched.period_ps) if len(stream) else 0
    return EventStream(stream.times_ps, stream.detectors, sched, n)


def cmd_simulate(args, cfg: RunConfig, out: Path) -> int:
    run = cfg["run"]
    kw = dict(jitter_ps=run["jitter_ps"], max_events=run["max_events"],
              trajectory_sample_period=run["trajectory_sample_period_ns"] * 1e-9)
    if args.encoded:
        sns = cfg["sns"]
        res = simulate_encoded_run(cfg.carrier(), cfg.noise(), cfg.schedule(), cfg.rates(), cfg.decoy(),
                                   cfg.channel(), run["n_frames"], run["seed"],
                                   pulse_period=sns["pulse_period_ns"] * 1e-9,
                                   phase_levels=sns["phase_levels"], **kw)
        stream = res.stream
        res.slots.save(out / "slots.npz")
    else:
        stream = simulate_run(cfg.carrier(), cfg.noise(), cfg.schedule(), cfg.rates(), seed=run["seed"],
                              n_frames=run["n_frames"], **kw)
    write_timetags(stream, out / "run.ttag")
    (out / "config.ini").write_text("\n".join(f"# {line}" for line in cfg.provenance()) + "\n" + cfg.to_text())
    print(f"{len(stream)} clicks in {run['n_frames']} frames -> {out / 'run.ttag'}")
    return 0


def cmd_recover(args, cfg: RunConfig, out: Path) -> int:
    stream = with_schedule(read_timetags(args.timetags), cfg)
    est = recover_stream(stream, stream.schedule, cfg.recovery(), threads=args.threads)
    path = out / "estimates.csv"
    write_estimates(est, path, cfg.provenance({"frames": stream.n_frames, "estimated": len(est)}))
    print(f"{len(est)} of {stream.n_frames} frames estimated -> {path}")
    return 0


def cmd_sift(args, cfg: RunConfig, out: Path) -> int:
    stream = with_schedule(read_timetags(args.timetags), cfg)
    est = read_estimates(args.estimates)
    header = cfg.provenance()
    if args.slots is None:
        res = tally_er(stream, est, stream.schedule, cfg.slice())
        path = out / "er.csv"
        rows = [("valid", res.valid), ("correct", res.correct), ("error", res.error),
                ("skipped", res.skipped), ("er", res.er), ("er_stderr", res.stderr)]
        write_csv(path, ("quantity", "value"), rows, header)
        print(f"ER = {res.er:.5f} +/- {res.stderr:.5f} over {res.valid} sifted clicks -> {path}")
        return 0
    sns = cfg["sns"]
    table = build_count_table(SlotTable.load(args.slots), stream, est, cfg.decoy(), stream.schedule,
                              gate_ps=sns["gate_ps"], seed=cfg["run"]["seed"])
    path = out / "counts.csv"
    text = "".join(f"# {line}\n" for line in header) + table.to_csv()
    path.write_text(text)
    print(f"n_t = {table.n_t}, QBER_Z = {table.qber_z:.4f} -> {path}")
    return 0


def cmd_keyrate(args, cfg: RunConfig, out: Path) -> int:
    table = CountTable.from_csv(args.table)
    rep = key_rate(table, cfg.decoy(), slots_per_second=cfg.slots_per_second())
    path = out / "keyrate.txt"
    path.write_text("".join(f"# {line}\n" for line in cfg.provenance()) + rep.to_text())
    if not rep.has_key:
        print(f"no key (stage: {rep.no_key_stage}) -> {path}")
        return EXIT_NO_KEY
    print(f"R = {rep.R:.4e} bit/pulse, K = {rep.K:.4e} bit/s -> {path}")
    return 0


def cmd_scenario(args, cfg: RunConfig, out: Path) -> int:
    res = SCENARIOS[args.name](cfg, threads=args.threads)
    for p in res.write(out):
        print(p)
    for k, v in sorted(res.summary.items()):
        print(f"  {k} = {v:.6g}")
    return 0


def cmd_replay(args, cfg: RunConfig, out: Path) -> int:
    d = cfg["decoy"]
    rows = replay(FailureProbs(d["eps_est"], d["eps_cor"], d["eps_pa"], d["eps_hat"]), d["f_ec"],
                  apply_errata=not args.raw_tables)
    cols = ("distance_km", "R", "R_reported", "ratio", "K", "K_reported", "slot_clock_hz", "no_key_stage")
    table = [(r.distance_km, r.report.R, r.reported_R, r.ratio, r.report.K, r.reported_K, r.slot_clock_hz,
              r.report.no_key_stage or "") for r in rows]
    path = out / "replay_paper.csv"
    write_csv(path, cols, table, cfg.provenance({"errata_applied": str(not args.raw_tables).lower()}))
    for r in rows:
        print(f"{r.distance_km:4d} km  R = {r.report.R:.3e}  reported {r.reported_R:.3e}  ratio {r.ratio:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI run configuration")
    common.add_argument("--seed", type=int, help="override [run] seed")
    common.add_argument("--out-dir", type=Path, default=Path("."), help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker threads")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one config value (repeatable)")

    p = argparse.ArgumentParser(prog="tfqkd", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"tfqkd {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate a click stream into run.ttag")
    s.add_argument("--encoded", action="store_true", help="encode SNS pulses in the Q-frames (writes slots.npz)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("recover", parents=[common], help="estimate the carrier of every Q-frame")
    s.add_argument("timetags", type=Path)
    s.set_defaults(func=cmd_recover)

    s = sub.add_parser("sift", parents=[common], help="ER tally, or a count table with --slots")
    s.add_argument("timetags", type=Path)
    s.add_argument("estimates", type=Path)
    s.add_argument("--slots", type=Path, help="slot table of an encoded run")
    s.set_defaults(func=cmd_sift)

    s = sub.add_parser("keyrate", parents=[common], help="secret key rate of a count table")
    s.add_argument("table", type=Path)
    s.set_defaults(func=cmd_keyrate)

    s = sub.add_parser("scenario", parents=[common], help="run a plot-data scenario")
    s.add_argument("name", choices=sorted(SCENARIOS))
    s.set_defaults(func=cmd_scenario)

    s = sub.add_parser("replay-paper", parents=[common], help="key rates of the bundled experimental tables")
    s.add_argument("--raw-tables", action="store_true", help="use the count tables without the errata")
    s.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        args.out_dir.mkdir(parents=True, exist_ok=True)
        return args.func(args, cfg, args.out_dir)
    except (ValueError, OSError) as exc:
        print(f"tfqkd: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
