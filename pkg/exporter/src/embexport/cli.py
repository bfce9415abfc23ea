"""Command-line entry point for the embedding exporter."""

from __future__ import annotations

import argparse
import sys

from .export import run
from .job import DEFAULT_MODEL, ExportJob, ExportMode


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cimrag-export")
    parser.add_argument("--input", required=True, help="JSONL dataset")
    parser.add_argument("--output", required=True, help="EMB1 or TRP1 destination")
    parser.add_argument(
        "--mode", choices=[m.value for m in ExportMode], default="Embeddings"
    )
    parser.add_argument("--model", default=DEFAULT_MODEL)
    parser.add_argument("--dropout", type=float, default=0.1)
    parser.add_argument("--k", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--batch-size", type=int, default=32, dest="batch_size")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = ExportJob(
            input_path=args.input,
            output_path=args.output,
            mode=ExportMode(args.mode),
            model_id=args.model,
            dropout=args.dropout,
            k_factor=args.k,
            seed=args.seed,
            batch_size=args.batch_size,
        )
        count = run(job)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    unit = "rows" if job.mode is ExportMode.EMBEDDINGS else "triplet groups"
    print(f"wrote {count} {unit} to {job.output_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
