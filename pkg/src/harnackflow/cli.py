"""Command line entry point: ``harnackflow run <file>`` and ``harnackflow suite <dir>``."""
from __future__ import annotations

import argparse
import logging
from pathlib import Path
import sys

from .scenario import EXIT_CONFIG, run_file, run_suite, suite_exit_code


def _overrides(args) -> dict:
    return {"nodes": args.nodes, "seed": args.seed, "tol_scale": args.tol_scale}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--tol-scale", type=float, default=None, help="multiply every tolerance")
    common.add_argument("--seed", type=int, default=None, help="seed for random initial data")
    common.add_argument("--nodes", type=int, default=None, help="override the number of intervals")
    common.add_argument("--quiet", action="store_true", help="only print the reason lines")

    parser = argparse.ArgumentParser(prog="harnackflow", description="Curvature flow Harnack laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", parents=[common], help="run one scenario file")
    p_run.add_argument("scenario", type=Path)
    p_suite = sub.add_parser("suite", parents=[common], help="run every *.cfg file in a directory")
    p_suite.add_argument("directory", type=Path)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which matches the config-error code
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "run":
        res = run_file(args.scenario, args.out, **_overrides(args))
        print(res.reason_line)
        if not args.quiet and res.out_dir is not None:
            print(f"outputs in {res.out_dir}", file=sys.stderr)
        return res.exit_code

    if not args.directory.is_dir():
        print(f"scenario=suite exit={EXIT_CONFIG} reason=config_error detail=\"no such directory\"")
        return EXIT_CONFIG
    results = run_suite(args.directory, args.out, **_overrides(args))
    for res in results:
        print(res.reason_line)
    code = suite_exit_code(results)
    out = args.out if args.out is not None else Path("out")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "suite_summary.txt", "w") as fh:
        fh.write(f"scenarios={len(results)}\n")
        fh.write(f"exit_code={code}\n")
        for res in results:
            fh.write(f"{res.name}={res.exit_code}\n")
    print(f"suite exit={code} scenarios={len(results)}")
    return code


if __name__ == "__main__":
    sys.exit(main())
