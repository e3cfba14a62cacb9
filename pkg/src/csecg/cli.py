"""Command line entry point: ``csecg <subcommand> [options]``.

Exit status: 0 when every task succeeded, 1 when some failed, 2 when the
configuration was rejected.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ConfigError
from .pipeline import (
    EXIT_ABORT,
    EXIT_OK,
    EXIT_PARTIAL,
    generate_synthetic_record,
    load_any_record,
    load_config,
    run_experiment,
)
from .sensing import compress_multichannel, config_from_cr

log = logging.getLogger("csecg")

_STAGES = {
    "similarity": ("similarity",),
    "detect": ("detect",),
    "evaluate": ("detect", "evaluate"),
    "run-all": ("similarity", "detect", "evaluate"),
}


def _add_common(p):
    p.add_argument("--config", help="key = value file; flags override its values")
    p.add_argument("--data-dir")
    p.add_argument("--records", help="comma-separated record names")
    p.add_argument("--channels", help="comma-separated 1-based channel numbers")
    p.add_argument("--cr", action="append", type=float, help="compression ratio, repeatable")
    p.add_argument("--samples", type=int)
    p.add_argument("--segments", type=int)
    p.add_argument("--tolerance-ms", type=float)
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="csecg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("compress", "write DBBD measurements for each record and cr"),
        ("similarity", "template similarity reports"),
        ("detect", "R-peak detections, native and original timescale"),
        ("evaluate", "Se, P+, F, DER per record and aggregated per cr"),
        ("run-all", "the full experiment"),
        ("synth", "write synthetic pulse-train fixtures"),
    ]:
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        if name == "synth":
            p.add_argument("--bpm", type=float, default=60.0)
            p.add_argument("--duration", type=float, default=30.0, help="seconds")
            p.add_argument("--fs", type=float, default=360.0)
    return parser


def _config_from_args(args):
    overrides = {
        "data_dir": args.data_dir,
        "record_ids": [r.strip() for r in args.records.split(",") if r.strip()] if args.records else None,
        "channels": [int(c) for c in args.channels.split(",")] if args.channels else None,
        "crs": args.cr,
        "sample_limit": args.samples,
        "num_segments": args.segments,
        "tolerance": None if args.tolerance_ms is None else args.tolerance_ms / 1000.0,
        "normalize": args.normalize,
        "output_format": args.format,
        "out_dir": args.out,
        "seed": args.seed,
        "workers": args.workers,
    }
    return load_config(args.config, **overrides)


def _synth(args, config):
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = config.record_ids if args.records else ["synth"]
    for k, name in enumerate(names):
        rec = generate_synthetic_record(args.bpm, args.duration, args.fs, config.seed + k, name=name)
        (out / f"{name}.json").write_text(rec.to_json())
        print(out / f"{name}.json")
    return EXIT_OK


def _compress(config):
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    failed = 0
    for rid in config.record_ids:
        try:
            rec = load_any_record(config.data_dir, rid, config.beat_codes, config.sample_limit)
            chans = [rec.physical(c - 1) for c in config.channels]
            for cr in config.crs:
                mc = compress_multichannel(chans, config_from_cr(config.sample_limit, cr, config.normalize),
                                           rec.sampling_rate)
                path = out / f"{rid}_cr{cr * 100:g}.{config.output_format}"
                path.write_text(mc.to_csv() if config.output_format == "csv" else mc.to_json())
                print(path)
        except Exception as exc:  # one bad record must not stop the others
            log.error("record %s: %s", rid, exc)
            failed += 1
    return EXIT_PARTIAL if failed else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = _config_from_args(args)
        if args.command != "synth":
            config.validate()
    except (ConfigError, ValueError, TypeError, OSError) as exc:
        print(f"csecg: configuration error: {exc}", file=sys.stderr)
        return EXIT_ABORT
    if args.command == "synth":
        return _synth(args, config)
    if args.command == "compress":
        return _compress(config)
    manifest = run_experiment(config, _STAGES[args.command])
    for t in manifest.tasks:
        if t["status"] != "ok":
            log.error("%s ch%s cr=%g: %s", t["record"], t["channel"], t["cr"], t["error"])
    print(f"{len(manifest.tasks)} tasks, exit {manifest.exit_code}; outputs in {config.out_dir}")
    return manifest.exit_code


if __name__ == "__main__":
    sys.exit(main())
