from __future__ import annotations

import argparse
from typing import Any, Dict, Optional

from src.config.defaults import TOOL_NAME, TOOL_VERSION
from src.config.schema import SECTION_FOR_COMMAND, ExperimentConfig, load_experiment_config


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


class CLIConfig:
    """Command-line configuration helper for the experiment runner."""

    @staticmethod
    def parse_args(argv: Optional[list[str]] = None) -> argparse.Namespace:
        parser = argparse.ArgumentParser(
            prog=TOOL_NAME,
            description="Mixed q-Gaussian moments and SYK models on overlapping index sets",
        )
        parser.add_argument("command", choices=sorted(SECTION_FOR_COMMAND), help="Experiment to run.")
        parser.add_argument("--config", required=True, help="Path of the JSON experiment config.")
        parser.add_argument("--seed", type=_u64, help="Master seed (overrides the config).")
        parser.add_argument("--threads", type=_positive, help="Worker threads for Monte Carlo chunks.")
        parser.add_argument("--out", help="Output path; stdout when omitted.")
        parser.add_argument("--format", choices=["csv", "json"], help="Output format.")
        parser.add_argument("--log-format", choices=["text", "json"], default="text", help="Log line format.")
        parser.add_argument("--verbose", action="store_true", help="Debug logging and per-row progress.")
        parser.add_argument("--version", action="version", version=f"{TOOL_NAME} {TOOL_VERSION}")
        return parser.parse_args(argv)

    @staticmethod
    def overrides(args: argparse.Namespace) -> Dict[str, Any]:
        return {"seed": args.seed, "threads": args.threads, "out": args.out, "format": args.format}

    @classmethod
    def resolve(cls, args: argparse.Namespace) -> ExperimentConfig:
        config = load_experiment_config(args.config, cls.overrides(args))
        config.section(args.command)
        return config
