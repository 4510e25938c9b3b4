"""Command-line entry point: ``stcorpus <subcommand> --config cfg.json``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import Config, ConfigError, parse_override
from .pipeline import COMMANDS, EXIT_CONFIG, cmd_run, exit_status

SUBCOMMANDS = {
    "segment": "segment",
    "clean": "clean",
    "dedup": "dedup",
    "langid": "langid",
    "select": "select",
    "align-filter": "align_filter",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stcorpus",
        description="Speech-translation corpus preparation: audio segmentation and text filtering.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON pipeline configuration")
    common.add_argument("--seed", type=int, help="random seed recorded in the report")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="STAGE.KEY=VALUE",
        help="override a config value (VALUE parsed as JSON when possible); repeatable",
    )
    common.add_argument("--report", type=Path, help="write the JSON report here")
    common.add_argument("--workers", type=int, help="threads for per-file / per-shard work")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, stage in SUBCOMMANDS.items():
        sub.add_parser(name, parents=[common], help=f"run the {stage} stage only")
    sub.add_parser("run", parents=[common], help="run all enabled stages in order")
    return parser


def load_config(args) -> Config:
    config = Config.load(args.config) if args.config else Config()
    for text in args.overrides:
        keys, value = parse_override(text)
        config.set(keys, value)
    if args.seed is not None:
        config.set(["seed"], args.seed)
    if args.workers is not None:
        config.set(["workers"], args.workers)
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args)
        if args.command == "run":
            stages = cmd_run(config)
        else:
            stage = SUBCOMMANDS[args.command]
            config.validate([stage])
            stages = {stage: COMMANDS[stage](config)}
    except ConfigError as exc:
        print(f"stcorpus: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = {"seed": config["seed"], "stages": stages}
    if args.report:
        args.report.parent.mkdir(parents=True, exist_ok=True)
        with open(args.report, "w", encoding="utf-8", newline="\n") as f:
            json.dump(report, f, indent=2, ensure_ascii=False)
            f.write("\n")
    else:
        json.dump(report, sys.stdout, indent=2, ensure_ascii=False)
        sys.stdout.write("\n")
    return exit_status(stages)


if __name__ == "__main__":
    sys.exit(main())
