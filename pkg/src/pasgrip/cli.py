"""Command-line entry point: ``pasgrip pipeline|gcgen|trajopt|topopt -c config.json``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import ConfigError, PipelineConfig
from .geometry.mesh import MeshError
from .parallel import set_max_workers
from .pipeline import EXIT_ERROR, STAGES, PipelineError, run_pipeline, run_stage

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("pasgrip")


def configure_logging() -> None:
    name = os.environ.get("PASGRIP_LOG", "info").strip().lower()
    level = LOG_LEVELS.get(name, logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s %(message)s", stream=sys.stderr)
    # basicConfig is a no-op when the root logger already has handlers; the package level still applies
    log.setLevel(level)
    # numba's compiler logs are noise at debug level
    logging.getLogger("numba").setLevel(max(level, logging.WARNING))
    if name not in LOG_LEVELS:
        log.warning("PASGRIP_LOG=%r not one of %s; using info", name, sorted(LOG_LEVELS))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pasgrip", description="Passive gripper design pipeline.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("pipeline",) + STAGES:
        sp = sub.add_parser(name, help="run all stages with resume" if name == "pipeline" else f"run the {name} stage")
        sp.add_argument("-c", "--config", required=True, help="pipeline config JSON")
        sp.add_argument("--threads", type=int, default=None, help="cap on worker threads")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        if name == "trajopt":
            sp.add_argument("--gc-file", default=None, help="GC JSON to use instead of <output_dir>/gcs.json")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    try:
        if args.threads is not None:
            set_max_workers(args.threads)
        cfg = PipelineConfig.load(args.config)
        if args.command == "pipeline":
            return run_pipeline(cfg, seed=args.seed)
        return run_stage(args.command, cfg, seed=args.seed, gc_file=getattr(args, "gc_file", None))
    except PipelineError as e:
        log.error("status=failed exit=%d reason=%s", e.exit_code, e)
        return e.exit_code
    except (ConfigError, MeshError, ValueError) as e:
        log.error("status=failed exit=%d reason=%s", EXIT_ERROR, e)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
