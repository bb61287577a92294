"""Command-line entry point: ``cbmorph <command> --config PATH``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import jsonschema

from . import config as config_mod
from . import experiments
from .errors import CbmorphError, ConfigError, ParameterError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

COMMANDS = {
    "rank-scan": experiments.run_rank_scan,
    "perturbation-scan": experiments.run_perturbation_scan,
    "detect-regions": experiments.run_detect_regions,
    "train": experiments.run_train,
    "predict-frf": experiments.run_predict_frf,
    "compare": experiments.run_compare,
}

_STD_ATTRS = set(vars(logging.LogRecord("", 0, "", 0, "", (), None))) | {"message", "asctime"}


class JsonLinesFormatter(logging.Formatter):
    def format(self, record):
        entry = {"level": record.levelname.lower(), "logger": record.name, "msg": record.getMessage()}
        for k, v in vars(record).items():
            if k not in _STD_ATTRS:
                entry[k] = v
        return json.dumps(entry, default=str, sort_keys=True)


def setup_logging():
    level = os.environ.get("CBMORPH_LOG", "info").upper()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonLinesFormatter())
    root = logging.getLogger("cbmorph")
    root.handlers[:] = [handler]
    root.setLevel(getattr(logging, level, logging.INFO))
    root.propagate = False


def build_parser():
    p = argparse.ArgumentParser(prog="cbmorph", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="experiment JSON, or preset:<name>")
    p.add_argument("--seed", type=int, help="overrides the config seed (unsigned 64-bit)")
    p.add_argument("--threads", type=int, default=1, help="worker cap; 1 is the reference path")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    return p


def _load_config(arg):
    if arg.startswith("preset:"):
        return config_mod.load(config_mod.preset_path(arg.split(":", 1)[1]))
    return config_mod.load(arg)


def main(argv=None) -> int:
    setup_logging()
    log = logging.getLogger("cbmorph.cli")
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg["seed"] = args.seed
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        out = Path(args.out or cfg["output_dir"])
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out, threads=args.threads)
    except (ConfigError, ParameterError, jsonschema.ValidationError, FileNotFoundError) as exc:
        log.error("configuration error", extra={"error": str(exc)})
        return EXIT_CONFIG
    except CbmorphError as exc:
        log.error("numerical failure", extra={"error": str(exc), "type": type(exc).__name__})
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
