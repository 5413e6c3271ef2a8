"""Command line: serve a builtin mirror model or a user predict function."""

from __future__ import annotations

import argparse
import importlib
import sys

from . import models
from .protocol import serve


def load_predict(spec: str):
    """Import 'package.module:function' and return the function."""
    module_name, _, attr = spec.partition(":")
    if not module_name or not attr:
        raise SystemExit(f"--predict must look like package.module:function, got {spec!r}")
    module = importlib.import_module(module_name)
    fn = getattr(module, attr, None)
    if fn is None:
        raise SystemExit(f"{module_name} has no attribute {attr!r}")
    return fn


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="eblime-adapter",
        description="Serve a prediction function over the explainer's "
        "newline-delimited JSON subprocess protocol.",
    )
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", choices=["mean-mask", "linear", "logistic"],
                       help="Builtin mirror model to serve.")
    group.add_argument("--predict", help="User function as package.module:function.")
    parser.add_argument("--p", type=int, default=None,
                        help="Feature count (required for builtin mirrors).")
    args = parser.parse_args(argv)

    if args.model is not None:
        if args.p is None or args.p < 1:
            parser.error("builtin mirrors need --p >= 1")
        predict_fn = models.resolve(args.model, args.p)
        shape = (args.p,)
    else:
        predict_fn = load_predict(args.predict)
        shape = (args.p,) if args.p else None

    return serve(predict_fn, input_shape=shape)


if __name__ == "__main__":
    sys.exit(main())
