"""
Command line.

  run           --config PATH   execute the config's mode, write CSV(s), print the summary
  compare       --config PATH   oracle + ADMM + baseline, both stopped on rel_error
  check-params  --config PATH   theory constants and the suggested beta
  example1      20 firms / 7 markets reproduction (--variant extreme: parameter sweep)
  example2      15-user rate-control reproduction against the baseline
  serve         HTTP surface (uvicorn)

Exit status: 0 ok, 1 I/O error, 2 configuration / solver error.
"""
from __future__ import annotations
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from app import storage
from app.config import load_config, with_overrides
from app.errors import NashAdmmError
from app.experiments import check_params, reproduce_example1, reproduce_example2, run_experiment
from app.log import setup_logging
from app.rng import U64_MAX
from app.settings import settings

logger = logging.getLogger(__name__)


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= v <= U64_MAX:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {v}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _common(p: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        p.add_argument("--config", required=True, type=Path, help="experiment config (JSON)")
    p.add_argument("--seed", type=_u64, default=None, help="u64 seed")
    p.add_argument("--out", default=None, help="CSV path (run/compare) or output directory (examples)")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--record-every", type=_positive_int, default=None)
    p.add_argument("--threads", type=_positive_int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nash-admm", description="Distributed NE seeking by inexact ADMM")
    parser.add_argument("--log-level", default=None, help=f"default {settings.LOG_LEVEL}")
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("run", help="run an experiment config"))
    _common(sub.add_parser("compare", help="ADMM vs. baseline on one config"))
    p = sub.add_parser("check-params", help="report theory constants and a sufficient beta")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--seed", type=_u64, default=None)

    p = sub.add_parser("example1", help="Nash-Cournot reproduction")
    _common(p, config=False)
    p.add_argument("--variant", choices=["standard", "extreme"], default="standard")

    p = sub.add_parser("example2", help="rate-control reproduction")
    _common(p, config=False)
    p.add_argument("--kappa", type=float, default=10.0)
    p.add_argument("--baseline-max-iter", type=int, default=500_000)

    p = sub.add_parser("serve", help="start the HTTP surface")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    seed = args.seed if getattr(args, "seed", None) is not None else settings.DEFAULT_SEED

    if args.command in ("run", "compare"):
        cfg = with_overrides(
            load_config(args.config),
            seed=args.seed, out=args.out, tol=args.tol, max_iter=args.max_iter,
            record_every=args.record_every, threads=args.threads,
            mode="compare" if args.command == "compare" else None,
        )
        report = run_experiment(cfg)
        sys.stdout.write(storage.format_summary(report.summary))
        return 0

    if args.command == "check-params":
        cfg = with_overrides(load_config(args.config), seed=args.seed)
        sys.stdout.write(storage.format_summary(check_params(cfg)))
        return 0

    if args.command == "example1":
        report = reproduce_example1(
            seed, variant=args.variant, out_dir=args.out,
            max_iter=args.max_iter,
            tol=args.tol if args.tol is not None else 1e-10,
            threads=args.threads or settings.THREADS,
            record_every=args.record_every or 1,
        )
        sys.stdout.write(storage.format_summary(report.summary))
        return 0

    if args.command == "example2":
        report = reproduce_example2(
            seed, out_dir=args.out,
            tol=args.tol if args.tol is not None else 1e-4,
            max_iter=args.max_iter if args.max_iter is not None else 100_000,
            baseline_max_iter=args.baseline_max_iter,
            kappa=args.kappa,
            threads=args.threads or settings.THREADS,
            record_every=args.record_every or 1,
        )
        sys.stdout.write(storage.format_summary(report.summary))
        return 0

    if args.command == "serve":
        import uvicorn

        uvicorn.run("app.main:app", host=args.host, port=args.port)
        return 0
    raise AssertionError(args.command)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        return _dispatch(args)
    except NashAdmmError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 1
