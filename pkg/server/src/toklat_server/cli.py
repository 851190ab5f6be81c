"""Command-line entry points: run the service, export the vocabulary."""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from .backends import build_backend, export_vocab
from .config import ServerConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toklat-server")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the scoring service")
    p.add_argument("--model", default="tiny:0",
                   help="tiny:SEED (built-in) or a HuggingFace model id/path")
    p.add_argument("--device", default="cpu")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8731)
    p.add_argument("--max-batch-size", type=int, default=64)
    p.add_argument("--max-concurrent", type=int, default=16)
    p.add_argument("--export-vocab", default=None, metavar="PATH",
                   help="write the vocabulary file before serving")

    p = sub.add_parser("export-vocab", help="write the vocabulary file and exit")
    p.add_argument("--model", default="tiny:0")
    p.add_argument("--device", default="cpu")
    p.add_argument("--out", required=True)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "export-vocab":
        backend = build_backend(args.model, args.device)
        payload = export_vocab(backend, args.out)
        print(json.dumps({
            "path": args.out,
            "vocab_size": payload["vocab_size"],
            "complete_alphabet": payload["complete_alphabet"],
            "warnings": payload.get("warnings", []),
        }))
        return 0

    config = ServerConfig(
        model=args.model,
        device=args.device,
        host=args.host,
        port=args.port,
        max_batch_size=args.max_batch_size,
        max_concurrent_requests=args.max_concurrent,
        vocab_export_path=args.export_vocab,
    )
    from .app import serve

    if config.vocab_export_path:
        export_vocab(build_backend(config.model, config.device),
                     config.vocab_export_path)
    serve(config)
    return 0


if __name__ == "__main__":
    sys.exit(main())
