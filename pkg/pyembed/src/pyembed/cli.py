"""Command line: encode text datasets into embedding bundle directories."""

from __future__ import annotations

import argparse
import sys

from .encode import encode_bundle
from .errors import EncodeError


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pyembed",
        description="Run a VLM text encoder over task texts and write a bundle directory.",
    )
    sub = ap.add_subparsers(dest="cmd", required=True)
    enc = sub.add_parser("encode", help="write one embedding bundle directory")
    enc.add_argument("--model", required=True, help="encoder spec, name:pretrain")
    enc.add_argument("--task", required=True, help="task spec JSON")
    enc.add_argument("--captions", required=True, help="generated captions JSON")
    enc.add_argument("--synonyms", required=True, help="generated synonyms JSON")
    enc.add_argument("--templates", required=True,
                     help="prompt templates, one per line, each containing {}")
    enc.add_argument("--out", required=True, help="bundle directory to write")
    enc.add_argument("--backend", choices=("open-clip", "hash"), default="open-clip",
                     help="hash is an offline deterministic stand-in")
    enc.add_argument("--dim", type=int, default=512, help="vector width (hash backend only)")
    enc.add_argument("--batch-size", type=int, default=256)
    enc.add_argument("--device", default="cpu")
    enc.add_argument("--images", default=None,
                     help="optional sidecar JSON passing through precomputed image rows")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        encode_bundle(
            args.model,
            args.task,
            args.captions,
            args.synonyms,
            args.templates,
            args.out,
            backend=args.backend,
            dim=args.dim,
            batch_size=args.batch_size,
            device=args.device,
            images_path=args.images,
        )
    except EncodeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
