"""Server entry point: transports, the self-test mode and the CLI."""

from __future__ import annotations

import argparse
import socket
import sys
from dataclasses import dataclass

import numpy as np
import torch

from .models import load_model
from .protocol import RequestHandler, serve_stream


@dataclass(frozen=True)
class ServerConfig:
    model: str
    query_model: str | None = None
    device: str = "cpu"
    max_batch: int = 32
    tcp_port: int | None = None  # None = stdio
    pooling: str = "mean"

    def __post_init__(self):
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")


def build_handler(config: ServerConfig) -> RequestHandler:
    model = load_model(config.model, config.query_model, config.device, config.pooling)
    return RequestHandler(model, max_batch=config.max_batch)


def serve(config: ServerConfig) -> None:
    """Answer protocol requests until shutdown (stdio) or forever (TCP)."""
    handler = build_handler(config)
    if config.tcp_port is None:
        serve_stream(handler, sys.stdin, sys.stdout)
        return
    with socket.create_server(("127.0.0.1", config.tcp_port)) as server:
        print(f"listening on 127.0.0.1:{config.tcp_port}", file=sys.stderr, flush=True)
        while True:
            conn, _ = server.accept()
            with conn:
                reader = conn.makefile("r", encoding="utf-8")
                writer = conn.makefile("w", encoding="utf-8")
                serve_stream(handler, reader, writer)


def selftest(config: ServerConfig, seed: int = 0, step: float = 1e-2) -> bool:
    """Check one gradient row against central finite differences (float32 regime).

    Perturbs each coordinate of one payload token's word embedding and
    compares the finite-difference row with autograd; passes when the
    relative L2 error is below 1e-2.
    """
    model = load_model(config.model, config.query_model, config.device, config.pooling)
    rng = np.random.default_rng(seed)
    texts = model.selftest_texts(rng)
    queries = model.encode_texts(texts)
    query_mean = torch.from_numpy(queries.astype(np.float64).mean(axis=0).astype(np.float32))

    # Special-token table rows also feed the wrapper positions, which
    # would contaminate the finite difference; keep them out of the draw.
    special = set(getattr(getattr(model, "tokenizer", None), "all_special_ids", None) or [])
    candidates = [t for t in range(model.vocab_size) if t not in special]
    ids = [int(candidates[i]) for i in rng.integers(0, len(candidates), size=6)]
    _, grad = model.loss_and_grad(ids, query_mean)
    row = int(rng.integers(len(ids)))

    embedding = _embedding_module(model)
    weight = embedding.weight.data
    original = weight[ids[row]].clone()
    fd = np.zeros(grad.shape[1], dtype=np.float64)
    try:
        for j in range(grad.shape[1]):
            weight[ids[row]] = original
            weight[ids[row], j] = original[j] + step
            up, _ = model.loss_and_grad(ids, query_mean)
            weight[ids[row], j] = original[j] - step
            down, _ = model.loss_and_grad(ids, query_mean)
            fd[j] = (up - down) / (2.0 * step)
    finally:
        weight[ids[row]] = original

    # The perturbed table row moves every position holding that token.
    count = ids.count(ids[row])
    analytic = grad[row].astype(np.float64) * count
    rel_err = float(np.linalg.norm(fd - analytic) / max(np.linalg.norm(analytic), 1e-8))
    print(f"selftest: gradient row {row}, relative L2 error {rel_err:.2e}", file=sys.stderr)
    return rel_err < 1e-2


def _embedding_module(model) -> torch.nn.Embedding:
    if hasattr(model, "passage_model"):
        return model.passage_model.get_input_embeddings()
    return model.embedding


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="aggd-bridge-server",
        description="Serve encoder embeddings and input-embedding gradients over line JSON",
    )
    parser.add_argument("--model", required=True,
                        help="transformers model name/path, or meanpool:DIR for the toy backend")
    parser.add_argument("--query-model", default=None, help="separate query encoder (optional)")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-batch", type=int, default=32)
    parser.add_argument("--tcp", type=int, default=None, metavar="PORT", help="serve on TCP instead of stdio")
    parser.add_argument("--pooling", choices=["mean", "cls"], default="mean")
    parser.add_argument("--selftest", action="store_true",
                        help="run the finite-difference gradient check and exit 0/1")
    args = parser.parse_args(argv)
    config = ServerConfig(
        model=args.model,
        query_model=args.query_model,
        device=args.device,
        max_batch=args.max_batch,
        tcp_port=args.tcp,
        pooling=args.pooling,
    )
    if args.selftest:
        return 0 if selftest(config) else 1
    serve(config)
    return 0


if __name__ == "__main__":
    sys.exit(main())
