"""Command line entry point: ``pulm-sim {consensus,optimize,certify,calibrate}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from ..exceptions import ConfigError
from .config import TASKS, load_config
from .runner import EXIT_CONFIG, run_experiment

logger = logging.getLogger("pulm_sim")


def _seed_path(out: str, seed: int) -> str:
    if "{seed}" in out:
        return out.format(seed=seed)
    p = Path(out)
    return str(p.with_name(f"{p.stem}.seed{seed}{p.suffix}"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pulm-sim", description=__doc__)
    sub = parser.add_subparsers(dest="task", required=True)
    for task in TASKS:
        p = sub.add_parser(task, help=f"run a {task} experiment")
        p.add_argument("--config", required=True, help="path to a key = value config file")
        p.add_argument("--seed", type=int, action="append",
                       help="override the config seed; repeat for a sweep")
        p.add_argument("--out", help="CSV output path (sweeps: may contain {seed})")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    try:
        cfg = load_config(args.config, args.task)
        out = args.out or cfg.output
        seeds = args.seed or [cfg.seed]
        jobs = []
        for s in seeds:
            path = out if len(seeds) == 1 else _seed_path(out, s)
            jobs.append((cfg.with_overrides(seed=s), path))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    threads = max(1, int(os.environ.get("PULM_SIM_THREADS", "1") or 1))
    if len(jobs) == 1 or threads == 1:
        codes = [run_experiment(c, p) for c, p in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            codes = list(pool.map(lambda job: run_experiment(*job), jobs))
    for (c, p), code in zip(jobs, codes):
        logger.info("seed %d -> %s (exit %d)", c.seed, p, code)
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
