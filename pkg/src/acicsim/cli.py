"""Command line front end: ``acicsim run|sweep|analyze|gen-trace``.

Exit status is 0 on success, 1 for configuration or usage errors and 2 for
failures while running (unreadable traces, invariant violations, I/O).
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .experiment import (
    ConfigError,
    ReportBundle,
    atomic_write,
    load_config,
    load_trace,
    run_experiment,
    sweep,
)
from .trace import SyntheticKind, SyntheticSpec, TraceFormat, generate, read_trace, write_trace

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("acicsim")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: {message}")


def _parse_grid(items):
    """``["threshold=8,16", "ifilter_capacity=[8,16]"]`` -> ``{"threshold": [8, 16], ...}``."""
    grid = {}
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--param expects NAME=V1,V2,..., got {item!r}")
        raw = raw.strip()
        text = raw if raw.startswith("[") else f"[{raw}]"
        try:
            values = json.loads(text)
        except json.JSONDecodeError:
            values = [v.strip() for v in raw.strip("[]").split(",") if v.strip()]
        grid[key.strip()] = values
    return grid


def _summary(bundle, out):
    cols = ("name", "misses", "mpki", "mpki_reduction", "opt_fraction")
    width = max([len(r["name"]) for r in bundle.rows] + [4])
    print(f"{'name':<{width}}  {'misses':>10}  {'mpki':>10}  {'reduct%':>9}  {'opt_frac%':>9}", file=out)
    for r in bundle.rows:
        vals = [r.get(c) for c in cols]
        fmt = ["" if v is None or v == "" else (f"{v:.3f}" if isinstance(v, float) else str(v)) for v in vals]
        print(f"{fmt[0]:<{width}}  {fmt[1]:>10}  {fmt[2]:>10}  {fmt[3]:>9}  {fmt[4]:>9}", file=out)
    if bundle.storage is not None:
        print(f"ACIC storage: {bundle.storage['total_kb']} KB", file=out)


def _overrides(args):
    return {"seed": args.seed, "output_dir": args.output_dir, "jobs": getattr(args, "jobs", None),
            "warmup": getattr(args, "warmup", None)}


def cmd_run(args):
    config = load_config(args.config, _overrides(args))
    bundle = run_experiment(config)
    _summary(bundle, sys.stdout)
    print(f"reports written to {config.output_dir}")


def cmd_sweep(args):
    config = load_config(args.config, _overrides(args))
    grid = _parse_grid(args.param) if args.param else config.sweep
    if not grid:
        raise ConfigError("sweep: no grid given (use --param or a 'sweep' block in the config)")
    bundle = sweep(config, grid)
    _summary(bundle, sys.stdout)
    print(f"reports written to {config.output_dir}")


def cmd_analyze(args):
    if (args.config is None) == (args.trace is None):
        raise ConfigError("analyze: give exactly one of --config or --trace")
    if args.config is not None:
        config = load_config(args.config, _overrides(args))
        addresses, bits, out_dir = load_trace(config), config.geometry.block_bits, Path(config.output_dir)
    else:
        addresses, bits = read_trace(args.trace, args.format), args.block_bits
        out_dir = Path(args.output_dir or "reports")
    frames = addresses >> np.uint64(bits)
    d = analysis.stack_distances(frames)
    bundle = ReportBundle(
        config={"source": args.config or args.trace, "block_bits": bits, "output_dir": str(out_dir)},
        rows=[],
        histogram=analysis.histogram(frames, d),
        markov=analysis.markov(frames, d),
    )
    files = bundle.files()
    files.pop("results.csv")
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        atomic_write(out_dir / name, text)
    for label, count in bundle.histogram.items():
        print(f"{label:>12}  {count}")
    print(f"reports written to {out_dir}")


def cmd_gen_trace(args):
    spec = SyntheticSpec(args.kind, args.block_count, args.burst_length, args.repetitions,
                         args.seed or 0, args.oneshot_ratio, args.block_bits)
    addresses = generate(spec)
    write_trace(args.output, addresses, args.format)
    print(f"wrote {len(addresses)} accesses to {args.output}")


def build_parser():
    p = _Parser(prog="acicsim", description="Trace-driven i-cache admission-control simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--seed", type=int, help="override the global seed")
        sp.add_argument("--output-dir", help="override the report directory")

    run = sub.add_parser("run", help="run every engine of a JSON config")
    run.add_argument("config", help="experiment config (JSON)")
    run.add_argument("--jobs", type=int, help="engine runs in parallel")
    run.add_argument("--warmup", type=int, help="override the warmup length")
    common(run)
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="cross-product sweep of ACIC parameters")
    sw.add_argument("config", help="experiment config (JSON)")
    sw.add_argument("--param", action="append", default=[], metavar="NAME=V1,V2",
                    help="grid axis; repeat for more axes (defaults to the config's sweep block)")
    sw.add_argument("--jobs", type=int, help="engine runs in parallel")
    sw.add_argument("--warmup", type=int, help="override the warmup length")
    common(sw)
    sw.set_defaults(func=cmd_sweep)

    an = sub.add_parser("analyze", help="reuse-distance histogram and Markov matrix")
    an.add_argument("--config", help="take the trace from an experiment config")
    an.add_argument("--trace", help="trace file")
    an.add_argument("--format", default=TraceFormat.TEXT_HEX.value, choices=[f.value for f in TraceFormat])
    an.add_argument("--block-bits", type=int, default=6)
    common(an)
    an.set_defaults(func=cmd_analyze)

    gt = sub.add_parser("gen-trace", help="write a synthetic trace file")
    gt.add_argument("--kind", required=True, choices=[k.value for k in SyntheticKind])
    gt.add_argument("--block-count", type=int, required=True)
    gt.add_argument("--burst-length", type=int, default=1)
    gt.add_argument("--repetitions", type=int, default=1)
    gt.add_argument("--oneshot-ratio", type=float, default=1.0)
    gt.add_argument("--block-bits", type=int, default=6)
    gt.add_argument("--format", default=TraceFormat.TEXT_HEX.value, choices=[f.value for f in TraceFormat])
    gt.add_argument("--seed", type=int, help="generator seed (default 0)")
    gt.add_argument("-o", "--output", required=True, help="output trace path")
    gt.set_defaults(func=cmd_gen_trace)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        if args.command == "gen-trace":
            # generator argument errors are usage errors
            try:
                SyntheticSpec(args.kind, args.block_count, args.burst_length, args.repetitions,
                              args.seed or 0, args.oneshot_ratio, args.block_bits)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"gen-trace: {exc}") from None
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        log.debug("failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
