"""Run the inference service: ``python -m cmservice`` or ``capmatch-service``."""

import argparse

import uvicorn

from .app import create_app
from .backends import DEFAULT_CAPTION_MODEL, DEFAULT_EMBED_MODEL, make_backend


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="capmatch-service", description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8787)
    parser.add_argument(
        "--backend",
        choices=["transformers", "hash"],
        default="transformers",
        help="hash is a weight-free deterministic backend for desk testing",
    )
    parser.add_argument("--caption-model", default=DEFAULT_CAPTION_MODEL)
    parser.add_argument("--embed-model", default=DEFAULT_EMBED_MODEL)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--dim", type=int, default=1024, help="hash backend only")
    parser.add_argument("--max-batch", type=int, default=64)
    args = parser.parse_args(argv)

    backend = make_backend(
        args.backend,
        caption_model_id=args.caption_model,
        embed_model_id=args.embed_model,
        device=args.device,
        dim=args.dim,
    )
    app = create_app(backend, max_batch=args.max_batch)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
