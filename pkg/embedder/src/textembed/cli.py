"""CLI: embed a text corpus into the engine's binary embedding format."""

from __future__ import annotations

import argparse
import logging
import sys

from .encoders import DEFAULT_MODEL, EncoderLoadError
from .jobs import EmbedJob, embed_corpus


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="textembed",
        description="Embed a document corpus with a pretrained sentence encoder.",
    )
    parser.add_argument("--input", required=True, help="input corpus path")
    parser.add_argument(
        "--format",
        choices=["lines", "jsonl"],
        default="lines",
        help="plain lines, or JSONL with id/text/label fields",
    )
    parser.add_argument("--model", default=DEFAULT_MODEL, help="encoder model name")
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--output", required=True, help="output embedding file")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    job = EmbedJob(
        input_path=args.input,
        output_path=args.output,
        input_format=args.format,
        model=args.model,
        batch_size=args.batch_size,
    )
    try:
        summary = embed_corpus(job)
    except (OSError, ValueError, EncoderLoadError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(
        f"{summary.documents} docs, dim {summary.dim}, "
        f"{summary.truncated} truncated -> {summary.output_path}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
