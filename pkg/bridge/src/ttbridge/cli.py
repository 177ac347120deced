"""Command line: `ttbridge serve --model nnw:<weights.nnw>` or a torchvision name."""

from __future__ import annotations

import argparse
import sys

from .models import load_model
from .server import serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ttbridge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_serve = sub.add_parser("serve", help="serve one model over stdio JSON")
    p_serve.add_argument("--model", required=True)
    args = parser.parse_args(argv)
    try:
        model = load_model(args.model)
    except Exception as exc:
        print(f"cannot load model {args.model!r}: {exc}", file=sys.stderr)
        return 2
    serve(model)
    return 0


if __name__ == "__main__":
    sys.exit(main())
