"""Command line front end: `grid`, `flops`, and `check`."""

from __future__ import annotations

import argparse
import json
import sys

from .checks import run_checks
from .flops import emit_table
from .harness import (
    ALL_BETAS,
    RunConfig,
    default_grid,
    emit_results,
    run_grid,
)
from .tasks import make_task  # noqa: F401  (re-exported for interactive use)

TASKS = ("permuted-copy", "salient-detection", "windowed-denoise")


def _parse_betas(text):
    if text == "all":
        return list(ALL_BETAS)
    return [b.strip() for b in text.split(",") if b.strip()]


def _grid_configs(args):
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            loaded = json.load(fh)
        if isinstance(loaded, dict):
            loaded = [loaded]
        return [RunConfig.from_dict(d) for d in loaded]
    overrides = {}
    if args.steps is not None:
        overrides["steps"] = args.steps
    if args.lr is not None:
        overrides["lr"] = args.lr
    if args.window is not None:
        overrides["window"] = args.window
    if args.stack is not None:
        overrides["stack"] = args.stack
    if args.betas is None:
        return default_grid(args.task, seed=args.seed, **overrides)
    return [RunConfig(task=args.task, beta=b, seed=args.seed, **overrides)
            for b in _parse_betas(args.betas)]


def _cmd_grid(args):
    configs = _grid_configs(args)
    task = configs[0].task
    records = run_grid(task, configs)
    if args.out:
        emit_results(records, path=args.out)
    else:
        sys.stdout.write(emit_results(records))
    failures = [r for r in records if r.failed]
    for r in failures:
        print(f"failed: {r.task} {r.stack} {r.beta}: {r.error}",
              file=sys.stderr)
    return 1 if failures else 0


def _cmd_flops(args):
    ns = [int(v) for v in args.ns.split(",")]
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            emit_table(ns, args.c, args.nk, args.ng, args.m, out=fh)
    else:
        sys.stdout.write(emit_table(ns, args.c, args.nk, args.ng, args.m))
    return 0


def _cmd_check(args):
    results = run_checks(names=args.only)
    width = max(len(name) for name, _ in results)
    failed = 0
    for name, err in results:
        if err is None:
            print(f"ok    {name}")
        else:
            failed += 1
            print(f"FAIL  {name:<{width}}  {err}")
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="attnlab",
        description="switched spatial attention: ablation grids, an exact "
                    "mac meter, and an invariant checker")
    sub = parser.add_subparsers(dest="command", required=True)

    grid = sub.add_parser("grid", help="run an ablation grid, emit CSV")
    grid.add_argument("--task", choices=TASKS, default="permuted-copy")
    grid.add_argument("--stack", default=None,
                      help="e.g. attended-block+deformable (default: the "
                           "task's base stack)")
    grid.add_argument("--betas", default=None,
                      help="comma-separated switch strings, or 'all' "
                           "(default: the task's standard row set)")
    grid.add_argument("--seed", type=int, default=0)
    grid.add_argument("--steps", type=int, default=None)
    grid.add_argument("--lr", type=float, default=None)
    grid.add_argument("--window", type=int, default=None)
    grid.add_argument("--config", default=None,
                      help="JSON file with one run config or a list of them; "
                           "overrides the flags above")
    grid.add_argument("--out", default=None, help="CSV path (default stdout)")
    grid.set_defaults(fn=_cmd_grid)

    flops = sub.add_parser("flops", help="emit the complexity-meter CSV")
    flops.add_argument("--ns", default="64,128,256,512",
                       help="comma-separated spatial sizes")
    flops.add_argument("--c", type=int, default=16)
    flops.add_argument("--nk", type=int, default=9)
    flops.add_argument("--ng", type=int, default=4)
    flops.add_argument("--m", type=int, default=2)
    flops.add_argument("--out", default=None, help="CSV path (default stdout)")
    flops.set_defaults(fn=_cmd_flops)

    check = sub.add_parser("check", help="run the invariant suite")
    check.add_argument("--only", nargs="*", default=None,
                       help="subset of check names")
    check.set_defaults(fn=_cmd_check)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
