"""Line-JSON request handling for the five bridge operations.

Every request line yields exactly one response line. Malformed input never
crashes the loop: unparseable lines answer with id -1, bad arguments with
``ok: false`` and the error text.
"""

from __future__ import annotations

import base64
import json

import numpy as np
import torch

from . import PROTOCOL_VERSION
from .models import ModelError


def payload_from(matrix: np.ndarray) -> tuple[list[int], str]:
    arr = np.ascontiguousarray(matrix, dtype="<f4")
    return list(arr.shape), base64.b64encode(arr.tobytes(order="C")).decode("ascii")


class RequestHandler:
    def __init__(self, model, max_batch: int = 32):
        self.model = model
        self.max_batch = max(1, max_batch)
        self.query_sets: dict[str, torch.Tensor] = {}
        self._next_handle = 0

    def handle_line(self, line: str) -> tuple[dict, bool]:
        """Process one request line; returns (response, shutdown requested)."""
        try:
            msg = json.loads(line)
            if not isinstance(msg, dict):
                raise ValueError("request must be a JSON object")
        except ValueError as exc:
            return {"id": -1, "ok": False, "error": f"malformed request: {exc}"}, False
        rid = msg.get("id", -1)
        try:
            rid = int(rid)
        except (TypeError, ValueError):
            rid = -1
        op = msg.get("op")
        try:
            if op == "info":
                return {
                    "id": rid,
                    "ok": True,
                    "dim": self.model.dim,
                    "vocab_size": self.model.vocab_size,
                    "version": PROTOCOL_VERSION,
                }, False
            if op == "set_queries":
                return {"id": rid, "ok": True, "handle": self._set_queries(msg["texts"])}, False
            if op == "encode_passages":
                shape, data = payload_from(self._encode(msg["token_ids"]))
                return {"id": rid, "ok": True, "shape": shape, "data": data}, False
            if op == "loss_and_grad":
                loss, grad = self._loss_and_grad(msg["token_ids"], msg["handle"])
                shape, data = payload_from(grad)
                return {"id": rid, "ok": True, "loss": loss, "shape": shape, "data": data}, False
            if op == "shutdown":
                return {"id": rid, "ok": True}, True
            return {"id": rid, "ok": False, "error": f"unknown op {op!r}"}, False
        except (ModelError, KeyError, TypeError, ValueError) as exc:
            detail = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
            return {"id": rid, "ok": False, "error": detail}, False

    def _set_queries(self, texts) -> str:
        if not isinstance(texts, list) or not texts or not all(isinstance(t, str) for t in texts):
            raise ModelError("texts must be a non-empty list of strings")
        vectors = []
        for chunk_start in range(0, len(texts), self.max_batch):
            vectors.append(self.model.encode_texts(texts[chunk_start : chunk_start + self.max_batch]))
        mean = np.concatenate(vectors).astype(np.float64).mean(axis=0)
        handle = f"q{self._next_handle}"
        self._next_handle += 1
        self.query_sets[handle] = torch.from_numpy(mean.astype(np.float32))
        return handle

    def _encode(self, token_ids) -> np.ndarray:
        if not isinstance(token_ids, list):
            raise ModelError("token_ids must be a list of id lists")
        batch = [[int(t) for t in ids] for ids in token_ids]
        if not batch:
            return np.zeros((0, self.model.dim), dtype=np.float32)
        chunks = [
            self.model.encode_ids(batch[start : start + self.max_batch])
            for start in range(0, len(batch), self.max_batch)
        ]
        return np.concatenate(chunks)

    def _loss_and_grad(self, token_ids, handle) -> tuple[float, np.ndarray]:
        if handle not in self.query_sets:
            raise ModelError(f"unknown handle {handle!r}")
        ids = [int(t) for t in token_ids]
        return self.model.loss_and_grad(ids, self.query_sets[handle])


def serve_stream(handler: RequestHandler, reader, writer) -> None:
    """Answer requests line by line until shutdown or EOF."""
    for line in reader:
        if not line.strip():
            continue
        response, stop = handler.handle_line(line)
        writer.write(json.dumps(response) + "\n")
        writer.flush()
        if stop:
            break
