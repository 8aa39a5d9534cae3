"""Bridge command line: encode-texts | encode-images | make-episodes | llm-fill."""

from __future__ import annotations

import argparse
import os
import sys

from . import jobs
from .encoders import EncoderError
from .s3em import S3emError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="s3em-bridge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode-texts")
    p.add_argument("--manifest", required=True, help="text file (one per line) or JSON")
    p.add_argument("--model", default="hash:512", help="clip:<hf-id> or hash:<dim>")
    p.add_argument("--out", required=True, help="output .s3em file")

    p = sub.add_parser("encode-images")
    p.add_argument("--manifest", required=True, help="image paths, optional <TAB>label")
    p.add_argument("--model", default="hash:512")
    p.add_argument("--out", required=True)

    p = sub.add_parser("make-episodes")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", default="hash:512")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--views", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("llm-fill")
    p.add_argument("--classes", required=True, help="class names, one per line or JSON")
    p.add_argument("--dataset", required=True)
    p.add_argument("--endpoint", required=True)
    p.add_argument("--key-env", help="environment variable holding the API key")
    p.add_argument("--out", required=True)
    p.add_argument("--max-synonyms", type=int, default=10)
    p.add_argument("--max-descriptors", type=int, default=30)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "encode-texts":
            n = jobs.encode_texts(args.manifest, args.model, args.out)
            print(f"encoded {n} texts -> {args.out}")
        elif args.command == "encode-images":
            n = jobs.encode_images(args.manifest, args.model, args.out)
            print(f"encoded {n} images -> {args.out}")
        elif args.command == "make-episodes":
            n = jobs.make_episodes(
                args.manifest, args.model, args.out, views=args.views, seed=args.seed
            )
            print(f"wrote {n} episodes ({args.views} views each) -> {args.out}")
        elif args.command == "llm-fill":
            key = os.environ.get(args.key_env) if args.key_env else None
            n = jobs.llm_fill(
                args.classes,
                args.dataset,
                args.endpoint,
                args.out,
                api_key=key,
                max_synonyms=args.max_synonyms,
                max_descriptors=args.max_descriptors,
            )
            print(f"filled lexicons for {n} classes -> {args.out}")
        return 0
    except (jobs.BridgeError, EncoderError, S3emError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
