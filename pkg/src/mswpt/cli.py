"""Command-line entry point: ``mswpt run | reproduce | validate | list-presets``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench


def _print_summary(summary: dict, out=None):
    out = out or sys.stdout
    for e in summary["entries"]:
        coords = f"M={e['M']} N={e['N']} K={e['K']} d={e['distance_m']:g}"
        if e["t_rand"] is not None:
            coords += f" T={e['t_rand']}"
        if e["weights"] is not None:
            coords += " w=" + "/".join(f"{w:g}" for w in e["weights"])
        m = e["vout_min"]
        line = f"{e['algorithm']:>18s}  {coords:<34s} min v_out {m['mean']:.5g} [{m['ci95'][0]:.5g}, {m['ci95'][1]:.5g}]"
        for ref in e.get("reference", []):
            line += f"  {ref['metric']} {e[ref['metric']]['mean']:.4g} (reference {ref['value']:g})"
        print(line, file=out)
    for r in summary["ratios"]:
        print(
            f"{r['numerator']}/{r['denominator']} M={r['M']} N={r['N']} K={r['K']}: "
            f"{r['ratio']:.4g} [{r['ci95'][0]:.4g}, {r['ci95'][1]:.4g}]",
            file=out,
        )


def _workers(args):
    return args.workers if args.workers is not None else bench.worker_count()


def cmd_run(args) -> int:
    cfg = bench.load_config(args.config)
    out = args.out or cfg.output or f"results/{cfg.name}"
    res = bench.run(cfg, out, _workers(args))
    _print_summary(res.summary)
    print(f"wrote {res.paths['results']}, {res.paths['summary']}, {res.paths['timing']}")
    return 0


def cmd_reproduce(args) -> int:
    cfg = bench.load_preset(args.preset).with_overrides(args.trials, args.seed)
    out = Path(args.out or "results") / args.preset
    res = bench.run(cfg, out, _workers(args))
    _print_summary(res.summary)
    print(f"wrote {res.paths['results']}, {res.paths['summary']}, {res.paths['timing']}")
    return 0


def cmd_validate(args) -> int:
    cfg = bench.load_config(args.config)
    n_points = len(bench.expand_points(cfg))
    print(f"{args.config}: ok ({n_points} points x {cfg.trials} trials, algorithms: {', '.join(cfg.algorithms)})")
    return 0


def cmd_list_presets(args) -> int:
    for name in bench.preset_names():
        cfg = bench.load_preset(name)
        print(f"{name:8s} {cfg.description}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mswpt", description="Multi-sine wireless power transfer waveform benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario file")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out", type=Path, help="output directory (default: scenario.output or results/<name>)")
    p.add_argument("--workers", type=int, help=f"worker processes (default: ${bench.WORKERS_ENV} or 1)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("reproduce", help="run a bundled preset")
    p.add_argument("--preset", required=True)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, help="parent output directory (default: results)")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("validate", help="check a scenario file without running it")
    p.add_argument("--config", required=True, type=Path)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("list-presets", help="list bundled presets")
    p.set_defaults(func=cmd_list_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except bench.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (KeyError, ValueError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
