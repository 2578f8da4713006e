"""Command-line entry points: the pipeline and the encoder endpoint."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .pipeline import run_pipeline
from .text_encoder import DEFAULT_DIM


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="preprocess",
        description="turn posed captures into a training dataset")
    parser.add_argument("--images", required=True, help="directory with frames + poses.json")
    parser.add_argument("--out", required=True, help="output dataset directory")
    parser.add_argument("--closed-set-only", action="store_true",
                        help="keep only detections matching the vocab")
    parser.add_argument("--vocab", default=None, help="JSON file of label hints")
    parser.add_argument("--prompts", default=None,
                        help="extra query prompts to embed, one per line")
    parser.add_argument("--dim", type=int, default=DEFAULT_DIM)
    parser.add_argument("--jobs", type=int, default=None)
    args = parser.parse_args(argv)

    vocab = json.loads(Path(args.vocab).read_text("utf-8")) if args.vocab else None
    prompts = [line.strip() for line in Path(args.prompts).read_text("utf-8").splitlines()
               if line.strip()] if args.prompts else None
    summary = run_pipeline(args.images, args.out, closed_set_only=args.closed_set_only,
                           vocab=vocab, prompts=prompts, dim=args.dim, jobs=args.jobs)
    print(f"wrote {summary['num_frames']} frames to {args.out}")
    print(f"dictionary: {', '.join(summary['dictionary'])}")
    return 0


def encoder_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="preprocess-encoder",
        description="serve POST /encode for live query embedding")
    parser.add_argument("--port", type=int, default=8801)
    parser.add_argument("--dim", type=int, default=DEFAULT_DIM)
    args = parser.parse_args(argv)

    from .encoder_service import make_encoder_server
    server = make_encoder_server(port=args.port, dim=args.dim)
    print(f"encoder listening on http://127.0.0.1:{server.server_port}/encode")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
