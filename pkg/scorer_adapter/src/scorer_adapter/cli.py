"""Command-line entry point: load a model artifact and serve it."""

import argparse
import logging
import os
import sys

from .config import AdapterConfig, AdapterError
from .model import load_model, startup_probe
from .server import serve_http, serve_stdio


def build_config(argv=None) -> AdapterConfig:
    parser = argparse.ArgumentParser(
        prog="scorer-adapter",
        description="Serve a trained model behind the scorer wire protocol "
        "(see PROTOCOL.md).",
    )
    parser.add_argument("--model", required=True, help="model artifact path")
    parser.add_argument("--kind", choices=("glm", "pickle"), default="glm")
    parser.add_argument(
        "--predict", choices=("value", "probability"), default="value",
        help="pickle models: use predict() or predict_proba()[:, 1]",
    )
    parser.add_argument(
        "--columns", default=None,
        help="comma-separated column order the model expects",
    )
    parser.add_argument("--serve", choices=("stdio", "http"), default="stdio")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    args = parser.parse_args(argv)
    return AdapterConfig(
        artifact=args.model,
        kind=args.kind,
        predict_mode=args.predict,
        columns=tuple(args.columns.split(",")) if args.columns else None,
        server=args.serve,
        host=args.host,
        port=args.port,
    )


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("ADAPTER_LOG", "WARNING").upper(), stream=sys.stderr
    )
    try:
        config = build_config(argv)
        model = load_model(config)
        startup_probe(model)
    except AdapterError as exc:
        print(f"scorer-adapter: {exc}", file=sys.stderr)
        return 1
    if config.server == "http":
        serve_http(model, config.host, config.port)
    else:
        serve_stdio(model)
    return 0


if __name__ == "__main__":
    sys.exit(main())
