"""Command line entry point.

    ralab <experiment-kind> --config <path.json> --out <dir> [--seed N]
          [--scale desk|paper]

Exit codes: 0 success, 2 constraint-violation / invalid config,
3 non-finite-loss abort.
"""

from __future__ import annotations

import argparse
import json
import sys

from .diffgraph import NonFiniteError
from .discriminators import ConstraintViolation
from .divergences.ipm import IpmDiverged
from .experiments import ExperimentConfig, run_experiment
from .training import TrainingAborted

KINDS = ("circle", "swissroll", "invertible", "perturbation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ralab",
        description="Run the synthetic distribution-learning experiments.")
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--config", default=None,
                        help="JSON config file (defaults per kind/scale)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--scale", choices=("desk", "paper"), default=None)
    return parser


def load_config(args) -> ExperimentConfig:
    doc = {}
    if args.config is not None:
        with open(args.config) as fh:
            doc = json.load(fh)
    doc["kind"] = args.kind
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.scale is not None:
        doc["scale"] = args.scale
    return ExperimentConfig.from_dict(doc)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"ralab: invalid config: {exc}", file=sys.stderr)
        return 2
    try:
        result = run_experiment(config, args.out)
    except (ConstraintViolation, ValueError) as exc:
        print(f"ralab: constraint violation: {exc}", file=sys.stderr)
        return 2
    except (TrainingAborted, IpmDiverged, NonFiniteError) as exc:
        print(f"ralab: non-finite loss: {exc}", file=sys.stderr)
        return 3
    if hasattr(result, "pearson_log"):
        print(f"pearson_log={result.pearson_log:.4f} "
              f"dropped={result.n_outliers_dropped}")
    else:
        print(json.dumps({k: v for k, v in result.items() if k != "config"},
                         indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
