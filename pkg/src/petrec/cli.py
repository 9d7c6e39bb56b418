"""Command-line entry point.

    petrec generate-data|train|evaluate|suvr-report|info
           --config <path> [--force] [--profile desk|paper-shape]

Exit codes: 0 success, 2 config error, 3 missing prerequisite, 4 runtime
failure. PETREC_SEED overrides the config seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import ConfigError, load_config
from .errors import DatasetError, PetrecError, PrerequisiteError
from .pipeline import cmd_evaluate, cmd_generate_data, cmd_info, cmd_suvr_report, cmd_train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PREREQ = 3
EXIT_RUNTIME = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="petrec")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, force=True):
        p.add_argument("--config", default=None, help="JSON config path (defaults apply)")
        p.add_argument("--profile", default="desk", choices=["desk", "paper-shape"])
        if force:
            p.add_argument("--force", action="store_true",
                           help="overwrite existing outputs")

    add_common(sub.add_parser("generate-data", help="write the phantom dataset"))
    train = sub.add_parser("train", help="train one phase")
    add_common(train)
    train.add_argument("--phase", required=True, choices=["transgan", "sdam"])
    add_common(sub.add_parser("evaluate", help="score test folds, emit manifest and plots"))
    add_common(sub.add_parser("suvr-report", help="SUVR agreement from evaluated volumes"))
    add_common(sub.add_parser("info", help="config summary and parameter counts"), force=False)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    seed_override = None
    if os.environ.get("PETREC_SEED"):
        try:
            seed_override = int(os.environ["PETREC_SEED"])
        except ValueError:
            print("error: PETREC_SEED must be an integer", file=sys.stderr)
            return EXIT_CONFIG

    try:
        cfg = load_config(args.config, profile=args.profile, seed_override=seed_override)
        if args.command == "generate-data":
            path = cmd_generate_data(cfg, force=args.force)
            print(f"dataset written to {path}")
        elif args.command == "train":
            for ckpt in cmd_train(cfg, args.phase, force=args.force):
                print(f"checkpoint written to {ckpt}")
        elif args.command == "evaluate":
            manifest = cmd_evaluate(cfg, force=args.force)
            print(json.dumps(manifest["metrics"], indent=2))
        elif args.command == "suvr-report":
            report = cmd_suvr_report(cfg, force=args.force)
            print(json.dumps(report, indent=2))
        elif args.command == "info":
            print(json.dumps(cmd_info(cfg), indent=2))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PrerequisiteError, DatasetError) as exc:
        print(f"missing prerequisite: {exc}", file=sys.stderr)
        return EXIT_PREREQ
    except PetrecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
