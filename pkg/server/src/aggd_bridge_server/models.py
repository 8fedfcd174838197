"""Encoder backends: pretrained transformers models and a toy mean-pool model.

Both expose the same surface: batched passage encoding from token ids,
query encoding from text, and the attack loss with its gradient taken at
the word-embedding rows of the attacker's tokens. The loss over a query
set is the negated mean dot-product similarity; since that is linear in
the query vector, the mean query embedding is cached per query set.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch


class ModelError(ValueError):
    """Invalid input for the hosted model (bad ids, empty passages, ...)."""


def _mean_pool(hidden: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    mask = mask.unsqueeze(-1).to(hidden.dtype)
    return (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1.0)


class ToyMeanPool:
    """Embedding-table mean pooling; directory holds embeddings.npy and vocab.txt.

    Exists so protocol conformance and gradient plumbing can be tested
    without model downloads; the gradient still flows through autograd.
    """

    def __init__(self, directory: str | Path):
        directory = Path(directory)
        table = np.load(directory / "embeddings.npy").astype(np.float32)
        self.embedding = torch.nn.Embedding.from_pretrained(torch.from_numpy(table), freeze=True)
        tokens = (directory / "vocab.txt").read_text(encoding="utf-8").splitlines()
        self.token_to_id = {tok: i for i, tok in enumerate(tokens)}
        self.unk_id = self.token_to_id.get("[UNK]", 0)
        self.dim = table.shape[1]
        self.vocab_size = table.shape[0]

    def _check_ids(self, ids):
        if not ids:
            raise ModelError("empty passage")
        for t in ids:
            if not 0 <= int(t) < self.vocab_size:
                raise ModelError(f"token id {t} out of range for vocab of size {self.vocab_size}")

    def encode_ids(self, batch: list[list[int]]) -> np.ndarray:
        rows = []
        with torch.no_grad():
            for ids in batch:
                self._check_ids(ids)
                emb = self.embedding(torch.tensor(ids, dtype=torch.long))
                rows.append(emb.mean(dim=0))
        return torch.stack(rows).numpy() if rows else np.zeros((0, self.dim), dtype=np.float32)

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        batch = []
        for text in texts:
            ids = [self.token_to_id.get(piece, self.unk_id) for piece in text.lower().split()]
            if not ids:
                raise ModelError("query tokenized to nothing")
            batch.append(ids)
        return self.encode_ids(batch)

    def loss_and_grad(self, ids: list[int], query_mean: torch.Tensor) -> tuple[float, np.ndarray]:
        self._check_ids(ids)
        emb = self.embedding(torch.tensor(ids, dtype=torch.long)).detach().requires_grad_(True)
        loss = -(query_mean @ emb.mean(dim=0))
        loss.backward()
        return float(loss.item()), emb.grad.detach().numpy().copy()

    def selftest_texts(self, rng: np.random.Generator) -> list[str]:
        tokens = list(self.token_to_id)
        picks = rng.choice(len(tokens), size=(2, 3))
        return [" ".join(tokens[i] for i in row) for row in picks]


class HFEncoder:
    """Pretrained dual-encoder host built on transformers.

    The server wraps the attacker's m tokens with the tokenizer's special
    tokens before encoding; gradient rows for those special tokens are
    stripped so the attacker optimizes only its own tokens.
    """

    def __init__(
        self,
        model: str,
        query_model: str | None = None,
        device: str = "cpu",
        pooling: str = "mean",
    ):
        from transformers import AutoModel, AutoTokenizer

        if pooling not in ("mean", "cls"):
            raise ValueError(f"unknown pooling {pooling!r}")
        self.pooling = pooling
        self.device = torch.device(device)
        self.tokenizer = AutoTokenizer.from_pretrained(model)
        self.passage_model = AutoModel.from_pretrained(model).to(self.device).eval()
        if query_model:
            self.query_tokenizer = AutoTokenizer.from_pretrained(query_model)
            self.query_model = AutoModel.from_pretrained(query_model).to(self.device).eval()
        else:
            self.query_tokenizer = self.tokenizer
            self.query_model = self.passage_model
        self.dim = int(self.passage_model.config.hidden_size)
        self.vocab_size = int(self.passage_model.config.vocab_size)

    def _pool(self, hidden: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        if self.pooling == "cls":
            return hidden[:, 0]
        return _mean_pool(hidden, mask)

    def _wrap(self, ids: list[int]) -> tuple[list[int], int, int]:
        """Surround payload ids with special tokens; returns (ids, start, stop) of the payload."""
        cls_id = self.tokenizer.cls_token_id
        sep_id = self.tokenizer.sep_token_id
        head = [cls_id] if cls_id is not None else []
        tail = [sep_id] if sep_id is not None else []
        return head + list(ids) + tail, len(head), len(head) + len(ids)

    def _check_ids(self, ids):
        if not ids:
            raise ModelError("empty passage")
        for t in ids:
            if not 0 <= int(t) < self.vocab_size:
                raise ModelError(f"token id {t} out of range for vocab of size {self.vocab_size}")

    def encode_ids(self, batch: list[list[int]]) -> np.ndarray:
        if not batch:
            return np.zeros((0, self.dim), dtype=np.float32)
        wrapped = []
        for ids in batch:
            self._check_ids(ids)
            wrapped.append(self._wrap(ids)[0])
        width = max(len(w) for w in wrapped)
        pad_id = self.tokenizer.pad_token_id or 0
        input_ids = torch.full((len(wrapped), width), pad_id, dtype=torch.long)
        mask = torch.zeros((len(wrapped), width), dtype=torch.long)
        for row, w in enumerate(wrapped):
            input_ids[row, : len(w)] = torch.tensor(w, dtype=torch.long)
            mask[row, : len(w)] = 1
        with torch.no_grad():
            hidden = self.passage_model(
                input_ids=input_ids.to(self.device), attention_mask=mask.to(self.device)
            ).last_hidden_state
            pooled = self._pool(hidden, mask.to(self.device))
        return pooled.cpu().numpy().astype(np.float32)

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        enc = self.query_tokenizer(
            list(texts), padding=True, truncation=True, return_tensors="pt"
        ).to(self.device)
        with torch.no_grad():
            hidden = self.query_model(**enc).last_hidden_state
            pooled = self._pool(hidden, enc["attention_mask"])
        return pooled.cpu().numpy().astype(np.float32)

    def loss_and_grad(self, ids: list[int], query_mean: torch.Tensor) -> tuple[float, np.ndarray]:
        self._check_ids(ids)
        wrapped, start, stop = self._wrap(ids)
        input_ids = torch.tensor([wrapped], dtype=torch.long, device=self.device)
        embeds = self.passage_model.get_input_embeddings()(input_ids).detach().requires_grad_(True)
        mask = torch.ones_like(input_ids)
        hidden = self.passage_model(inputs_embeds=embeds, attention_mask=mask).last_hidden_state
        pooled = self._pool(hidden, mask)[0]
        loss = -(query_mean.to(self.device) @ pooled)
        loss.backward()
        grad = embeds.grad[0, start:stop].detach().cpu().numpy().copy()
        return float(loss.item()), grad

    def selftest_texts(self, rng: np.random.Generator) -> list[str]:
        ids = rng.integers(0, self.vocab_size, size=(2, 4))
        return [self.tokenizer.decode([int(t) for t in row]) or "test" for row in ids]


def load_model(spec: str, query_spec: str | None, device: str, pooling: str):
    """``meanpool:DIR`` selects the toy backend; anything else loads transformers."""
    if spec.startswith("meanpool:"):
        return ToyMeanPool(spec.split(":", 1)[1])
    return HFEncoder(spec, query_model=query_spec, device=device, pooling=pooling)
