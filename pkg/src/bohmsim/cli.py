"""Command line front-end.

    bohmsim run CONFIG [--out DIR] [--threads N] [--seed-override S]
    bohmsim validate CONFIG
    bohmsim list-scenarios

Exit codes: 0 pass, 1 assertion failure, 2 config error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import ConfigError, load_config, shipped_scenarios

EXIT_PASS, EXIT_ASSERT, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
THREADS_ENV = "BOHMSIM_THREADS"


def _resolve(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    known = shipped_scenarios(include_negative=True)
    if path in known:
        return known[path]
    return p


def _threads(arg: int | None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get(THREADS_ENV)
    return int(env) if env and env.isdigit() and int(env) > 0 else 1


def cmd_run(args) -> int:
    try:
        cfg = load_config(_resolve(args.config))
    except ConfigError as err:
        for e in err.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed_override is not None:
        cfg = cfg.with_seed(args.seed_override)
    from .runner import run_scenario

    out = Path(args.out) if args.out else Path("runs") / cfg.name
    result = run_scenario(cfg, out, _threads(args.threads))
    for c in result.checks:
        mark = "PASS" if c.passed else "FAIL"
        val = "" if c.value is None else f" value={c.value:.6g} bound={c.bound:.6g}"
        print(f"[{mark}] {c.name}{val}" + (f"  {c.detail}" if c.detail and not c.passed else ""))
    if result.error:
        print(f"{result.error['type']} error: {result.error['message']}", file=sys.stderr)
    print(f"{cfg.name}: exit {result.exit_code}, outputs in {out}")
    return result.exit_code


def cmd_validate(args) -> int:
    try:
        cfg = load_config(_resolve(args.config))
    except ConfigError as err:
        for e in err.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{cfg.name}: valid {cfg.kind} scenario")
    return EXIT_PASS


def cmd_list(args) -> int:
    for name, path in shipped_scenarios(include_negative=True).items():
        cfg = load_config(path)
        tag = " (negative control, expects exit %d)" % cfg.expect_exit if cfg.expect_exit else ""
        desc = cfg.get("scenario", "description", "")
        print(f"{name:24s} {cfg.kind:14s} {desc}{tag}")
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bohmsim", description="Bohmian trajectory simulations from scenario files.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario and write its outputs")
    r.add_argument("config", help="scenario file, or the name of a shipped scenario")
    r.add_argument("--out", help="output directory (default runs/<name>)")
    r.add_argument("--threads", type=int, help=f"worker threads for trajectory ensembles (env {THREADS_ENV})")
    r.add_argument("--seed-override", type=int, dest="seed_override", help="replace run.seed")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="check a scenario file without running it")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)
    s = sub.add_parser("list-scenarios", help="list the shipped scenarios")
    s.set_defaults(func=cmd_list)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_PASS
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
