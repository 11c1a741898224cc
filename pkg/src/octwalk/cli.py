"""Command line interface: ``octwalk <stage> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .stepset import NBITS


def _add_globals(p: argparse.ArgumentParser) -> None:
    p.add_argument("--db", default=None, help="database directory")
    p.add_argument("--config", default=None, help="TOML file with pipeline settings")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--max-size", type=int, default=None, help="largest step-set size to enumerate")
    p.add_argument("--force", action="store_true", help="rerun a stage even if it is marked done")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="octwalk", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("enumerate", "filter", "group", "reconstruct", "asympt", "guess", "report"):
        _add_globals(sub.add_parser(name))
    count = sub.add_parser("count", help="count walks modulo a prime (one model) or run the count stage")
    _add_globals(count)
    count.add_argument("--model", help="step set as 7 hex digits or a 26-character diagram")
    count.add_argument("--target", default="all", choices=("excursions", "all"))
    count.add_argument("--prime", type=int, default=32749)
    count.add_argument("--n", type=int, default=100)
    count.add_argument("--out", help="series file to write (binary OW3S)")
    run = sub.add_parser("run", help="run all stages in order")
    _add_globals(run)
    return parser


def _parse_model(text: str) -> int:
    from .stepset import from_diagram

    t = text.strip()
    if len(t.replace(" ", "")) == NBITS and set(t) <= set("01 "):
        return from_diagram(t)
    return int(t, 16)


def _config(args):
    from pathlib import Path

    from .pipeline import ClassificationDB, PipelineConfig

    if args.config:
        cfg = PipelineConfig.from_toml(args.config)
    elif args.db and (Path(args.db) / "meta.json").exists():
        # an existing database keeps the settings it was created with
        cfg = ClassificationDB(args.db).config
    else:
        cfg = PipelineConfig()
    if args.db:
        cfg.db = args.db
    if args.threads is not None:
        cfg.threads = args.threads
    if args.seed is not None:
        cfg.seed = args.seed
    if args.max_size is not None:
        cfg.max_size = args.max_size
    return cfg


def _count_single(args) -> int:
    from .countkernel import count_layers

    if args.threads:
        _set_threads(args.threads)
    mask = _parse_model(args.model)
    series = count_layers(mask, args.n, args.prime, args.target, shards=max(1, args.threads or 1))
    if args.out:
        series.save(args.out)
    else:
        print(" ".join(str(int(x)) for x in series.terms))
    return 0


def _set_threads(n: int) -> None:
    from . import _accel

    if _accel.USE_NUMBA:
        import numba

        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "count" and args.model:
        return _count_single(args)

    from .pipeline import STAGES, ClassificationDB, report, run_stage

    cfg = _config(args)
    _set_threads(cfg.threads)
    if args.command == "report":
        db = ClassificationDB(cfg.db)
        sys.stdout.write(report(db))
        return 0
    db = ClassificationDB(cfg.db, cfg)
    db.config.threads = cfg.threads
    stages = STAGES if args.command == "run" else (args.command,)
    for stage in stages:
        ran = run_stage(db, stage, force=args.force)
        info = db.meta["stages"].get(stage, {})
        print(json.dumps({"stage": stage, "ran": ran, **info}))
        if info.get("errors"):
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
