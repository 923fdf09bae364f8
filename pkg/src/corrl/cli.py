"""Command line: ``corrl run | sweep | plot``.

Failures exit nonzero with a one-line JSON object on stderr.  Verbosity
comes from the CORRL_LOG_LEVEL environment variable (default WARNING).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .harness import ConfigError, EpisodeError, ExperimentConfig, emit_plot, run_sweep, write_run


def _parser():
    p = argparse.ArgumentParser(prog="corrl", description="Corruption-robust RL experiments")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    sweep = sub.add_parser("sweep", help="run a parameter grid")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--grid", required=True)
    sweep.add_argument("--out", required=True)
    plot = sub.add_parser("plot", help="plot cumulative regret curves")
    plot.add_argument("--csv", nargs="+", required=True)
    plot.add_argument("--out", required=True)
    return p


def _fail(kind, message, code=1, **extra):
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}) + "\n")
    return code


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("CORRL_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        return _fail("usage", "invalid command line arguments", 2)
    try:
        if args.command == "run":
            cfg = ExperimentConfig.load(args.config)
            if args.seed is not None:
                cfg.seed = args.seed
            out = args.out or cfg.output_dir
            if not out:
                raise ConfigError("no output directory: pass --out or set output_dir")
            cfg.validate()
            paths = write_run(cfg, out)
            print(json.dumps({"csv": paths}))
        elif args.command == "sweep":
            cfg = ExperimentConfig.load(args.config)
            with open(args.grid) as fh:
                grid = json.load(fh)
            index = run_sweep(cfg, grid, args.out)
            print(json.dumps({"runs": len(index), "out": args.out}))
        else:
            emit_plot(args.csv, args.out)
            print(json.dumps({"svg": args.out}))
    except ConfigError as exc:
        return _fail("config", str(exc))
    except EpisodeError as exc:
        return _fail("episode", str(exc), episode=exc.k)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail("io", str(exc))
    except (ValueError, KeyError, TypeError) as exc:
        return _fail("invalid", str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
