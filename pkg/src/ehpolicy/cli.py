"""Command-line interface: solve | search | sweep | simulate | bound | validate."""

from __future__ import annotations

import argparse
import sys

from .config import ScenarioConfig
from .errors import EHPolicyError
from .harness import (
    run_bound,
    run_search,
    run_simulate,
    run_solve,
    run_sweep,
    run_validate,
    write_manifest,
)
from .presets import get_preset, preset_names


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ehpolicy",
        description="Transmission-policy optimization for energy-harvesting "
                    "devices with lossy batteries and coarse charge observation.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("solve", "optimal per-state policy (perfect charge knowledge)"),
            ("search", "exhaustive per-subset policy search (coarse observation)"),
            ("sweep", "evaluate policies and bounds over sweep axes"),
            ("simulate", "Monte Carlo cross-check of the analytic reward"),
            ("bound", "storage-aware throughput upper bound"),
            ("validate", "config checks and the recharge hypothesis")):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", help="path to a YAML scenario config")
        cmd.add_argument("--preset", choices=preset_names(),
                         help="named built-in scenario")
        cmd.add_argument("--out", default="out", help="output directory")
        cmd.add_argument("--seed", type=int, help="override the config seed")
        cmd.add_argument("--threads", type=int, default=1,
                         help="worker processes for sweep points")
    return parser


def _load_config(args) -> ScenarioConfig:
    if args.config and args.preset:
        raise EHPolicyError("give either --config or --preset, not both")
    if args.config:
        cfg = ScenarioConfig.load(args.config)
    elif args.preset:
        cfg = get_preset(args.preset)
    else:
        raise EHPolicyError("one of --config or --preset is required")
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        if args.command == "validate":
            ok, messages = run_validate(cfg)
            for msg in messages:
                print(msg)
            return 0 if ok else 1
        write_manifest(cfg, args.out, args.command)
        if args.command == "solve":
            rows = run_solve(cfg, args.out)
        elif args.command == "search":
            rows = run_search(cfg, args.out)
        elif args.command == "sweep":
            rows = run_sweep(cfg, args.out, threads=args.threads)
        elif args.command == "simulate":
            rows = run_simulate(cfg, args.out)
        elif args.command == "bound":
            rows = run_bound(cfg, args.out)
        else:  # pragma: no cover - argparse enforces choices
            raise EHPolicyError(f"unknown command {args.command}")
        for row in rows:
            rec = row.as_record()
            status = rec["error"] or f"G={rec['g_analytic'] or 'n/a'}"
            print(f"{rec['scenario']} {rec['policy']} e_max={rec['e_max']} "
                  f"band={rec['band'] or '-'} {status}")
        print(f"results written to {args.out}")
        return 0
    except EHPolicyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
