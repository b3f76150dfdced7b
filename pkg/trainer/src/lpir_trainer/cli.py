"""Command-line front end: train on a raw_f64 dataset, export hand-offs."""

from __future__ import annotations

import argparse
import sys

from .data import load_raw_f64
from .export import export_queries, export_scheme_point
from .train import TrainerConfig, train


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="lpir-trainer",
        description="Adversarial trainer for learned retrieval schemes",
    )
    parser.add_argument("--dataset", required=True,
                        help="raw_f64 training dataset")
    parser.add_argument("--answer-dim", type=int, default=6)
    parser.add_argument("--quant-levels", type=int, default=2)
    parser.add_argument("--minibatch", type=int, default=2048)
    parser.add_argument("--iterations", type=int, default=2000)
    parser.add_argument("--eta-initial", type=float, default=0.5)
    parser.add_argument("--eta-increment", type=float, default=0.0002)
    parser.add_argument("--target-accuracy", type=float, default=None)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--queries-out", required=True,
                        help="query CSV for the audit command")
    parser.add_argument("--point-out", required=True,
                        help="scheme point CSV")
    parser.add_argument("--queries-per-file", type=int, default=20000)
    args = parser.parse_args(argv)

    files = load_raw_f64(args.dataset)
    config = TrainerConfig(
        answer_dim=args.answer_dim,
        quant_levels=args.quant_levels,
        minibatch=args.minibatch,
        iterations=args.iterations,
        eta_initial=args.eta_initial,
        eta_increment=args.eta_increment,
        target_accuracy=args.target_accuracy,
        seed=args.seed,
    )
    scheme = train(files, config)
    if scheme.diverged:
        print("training diverged; partial history retained", file=sys.stderr)
        return 3
    export_queries(scheme, args.queries_per_file, args.seed + 1,
                   args.queries_out)
    export_scheme_point(scheme, args.point_out)
    print(f"rate={scheme.rate:.4g} accuracy={scheme.final_accuracy:.4g} "
          f"distortion={scheme.final_distortion:.4g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
