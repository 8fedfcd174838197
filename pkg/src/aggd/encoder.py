"""Dense-encoder abstraction: similarity, attack loss and analytic gradients.

Two built-in desk-scale encoders share one handle type:

* ``mean-pool`` — the passage vector is the arithmetic mean of its token
  embeddings. Similarity is then linear in every token embedding, so the
  first-order swap estimate used by the attacks is exact.
* ``tanh-projection`` — mean-pool followed by ``tanh(W u + b)``. The
  nonlinearity makes the first-order estimate approximate, which is what
  lets tier escalation and candidate-quality gaps show up at desk scale.

A third ``remote`` kind delegates to an external encoder process through
the bridge client. The attack loss over a query set is always computed
from the mean query vector: the similarity is a dot product, hence linear
in the query vector, so the mean is a sufficient statistic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .bridge import BridgeSession, RemoteQuerySet
from .data import TokenSequence


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """Token embeddings, one float64 row per vocabulary id."""

    vectors: np.ndarray  # |V| x dim

    def __post_init__(self):
        vec = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if vec.ndim != 2:
            raise ValueError("embedding table must be a 2-D matrix")
        if not np.all(np.isfinite(vec)):
            raise ValueError("embedding table contains non-finite entries")
        object.__setattr__(self, "vectors", vec)

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def random_embedding_table(size: int, dim: int, seed: int) -> EmbeddingTable:
    """Uniform [-1, 1] table from a seeded generator, for fixtures and synthetic runs."""
    rng = np.random.default_rng(seed)
    return EmbeddingTable(rng.uniform(-1.0, 1.0, size=(size, dim)))


@dataclass(frozen=True, eq=False)
class QueryBundle:
    """Encoded query vectors plus their mean, the loss's sufficient statistic."""

    vectors: np.ndarray  # n_q x dim_out
    mean_vector: np.ndarray

    def __post_init__(self):
        vectors = np.ascontiguousarray(self.vectors, dtype=np.float64)
        mean = np.ascontiguousarray(self.mean_vector, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] == 0:
            raise ValueError("query bundle requires at least one query vector")
        expected = vectors.mean(axis=0)
        scale = max(float(np.max(np.abs(expected))), 1.0)
        if float(np.max(np.abs(mean - expected))) > 1e-12 * scale:
            raise ValueError("mean_vector is not the mean of the query vectors")
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "mean_vector", mean)

    @classmethod
    def from_vectors(cls, vectors) -> "QueryBundle":
        vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        return cls(vectors=vectors, mean_vector=vectors.mean(axis=0))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


# GradientMatrix is a plain m x dim float64 ndarray, row i = d(loss)/d(embedding of token i).
GradientMatrix = np.ndarray

MEAN_POOL = "mean-pool"
TANH_PROJECTION = "tanh-projection"
REMOTE = "remote"


@dataclass(frozen=True, eq=False)
class EncoderHandle:
    """Uniform handle over the built-in encoders and the bridge-backed remote kind."""

    kind: str
    table: EmbeddingTable | None = None
    weights: np.ndarray | None = None  # dim_out x dim, tanh kind only
    bias: np.ndarray | None = None  # dim_out, tanh kind only
    session: BridgeSession | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in (MEAN_POOL, TANH_PROJECTION, REMOTE):
            raise ValueError(f"unknown encoder kind {self.kind!r}")
        if self.kind in (MEAN_POOL, TANH_PROJECTION) and self.table is None:
            raise ValueError(f"{self.kind} encoder requires an embedding table")
        if self.kind == TANH_PROJECTION:
            if self.weights is None or self.bias is None:
                raise ValueError("tanh-projection encoder requires weights and bias")
            w = np.ascontiguousarray(self.weights, dtype=np.float64)
            b = np.ascontiguousarray(self.bias, dtype=np.float64)
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ValueError("projection weights must be (dim_out x dim), bias (dim_out,)")
            if w.shape[1] != self.table.dim:
                raise ValueError("projection width does not match embedding dim")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("projection parameters contain non-finite entries")
            object.__setattr__(self, "weights", w)
            object.__setattr__(self, "bias", b)
        if self.kind == REMOTE and self.session is None:
            raise ValueError("remote encoder requires a bridge session")

    @property
    def dim_out(self) -> int:
        if self.kind == MEAN_POOL:
            return self.table.dim
        if self.kind == TANH_PROJECTION:
            return self.weights.shape[0]
        return self.session.dim


def mean_pool_encoder(table: EmbeddingTable) -> EncoderHandle:
    return EncoderHandle(kind=MEAN_POOL, table=table)


def tanh_encoder(table: EmbeddingTable, weights, bias) -> EncoderHandle:
    return EncoderHandle(
        kind=TANH_PROJECTION,
        table=table,
        weights=np.asarray(weights, dtype=np.float64),
        bias=np.asarray(bias, dtype=np.float64),
    )


def seeded_tanh_encoder(table: EmbeddingTable, dim_out: int, seed: int) -> EncoderHandle:
    """Projection parameters drawn uniform [-1, 1] from the given seed."""
    rng = np.random.default_rng(seed)
    weights = rng.uniform(-1.0, 1.0, size=(dim_out, table.dim))
    bias = rng.uniform(-1.0, 1.0, size=dim_out)
    return tanh_encoder(table, weights, bias)


def remote_encoder(session: BridgeSession, mirrored_table: EmbeddingTable | None = None) -> EncoderHandle:
    """Bridge-backed encoder; a mirrored table enables gradient token scoring."""
    return EncoderHandle(kind=REMOTE, table=mirrored_table, session=session)


def _token_rows(enc: EncoderHandle, seq: TokenSequence) -> np.ndarray:
    ids = np.fromiter(seq.ids, dtype=np.intp, count=len(seq))
    if len(ids) == 0:
        raise ValueError("cannot encode an empty token sequence")
    if ids.min() < 0 or ids.max() >= enc.table.size:
        bad = int(ids[(ids < 0) | (ids >= enc.table.size)][0])
        raise ValueError(f"token id {bad} out of range for table of size {enc.table.size}")
    return enc.table.vectors[ids]


def encode_passage(enc: EncoderHandle, seq: TokenSequence) -> np.ndarray:
    """Passage vector for one token sequence."""
    if enc.kind == REMOTE:
        return enc.session.encode_passages([seq])[0].astype(np.float64)
    u = _token_rows(enc, seq).mean(axis=0)
    if enc.kind == MEAN_POOL:
        return u
    return np.tanh(enc.weights @ u + enc.bias)


def encode_queries(enc: EncoderHandle, queries: Sequence) -> QueryBundle | RemoteQuerySet:
    """Encode a query set.

    Built-in kinds take token sequences (queries share the passage encoder)
    and return a :class:`QueryBundle`. The remote kind takes raw text and
    returns a server-side :class:`RemoteQuerySet` handle.
    """
    queries = list(queries)
    if not queries:
        raise ValueError("query set is empty")
    if enc.kind == REMOTE:
        if not all(isinstance(q, str) for q in queries):
            raise TypeError("remote encoder expects query texts")
        return enc.session.set_queries(queries)
    if any(isinstance(q, str) for q in queries):
        raise TypeError("built-in encoders expect token sequences; tokenize query texts first")
    vectors = np.stack([encode_passage(enc, q) for q in queries])
    return QueryBundle.from_vectors(vectors)


def loss(enc: EncoderHandle, seq: TokenSequence, qb) -> float:
    """Attack loss: negated mean similarity of the passage to the query set."""
    if enc.kind == REMOTE:
        value, _ = enc.session.loss_and_grad(seq, qb)
        return value
    if qb.dim != enc.dim_out:
        raise ValueError(f"query dim {qb.dim} does not match encoder output dim {enc.dim_out}")
    return float(-(qb.mean_vector @ encode_passage(enc, seq)))


def loss_gradient(enc: EncoderHandle, seq: TokenSequence, qb) -> tuple[float, GradientMatrix]:
    """Loss and its gradient with respect to each token-embedding row of the passage."""
    if enc.kind == REMOTE:
        return enc.session.loss_and_grad(seq, qb)
    if qb.dim != enc.dim_out:
        raise ValueError(f"query dim {qb.dim} does not match encoder output dim {enc.dim_out}")
    m = len(seq)
    rows = _token_rows(enc, seq)
    u = rows.mean(axis=0)
    if enc.kind == MEAN_POOL:
        value = float(-(qb.mean_vector @ u))
        grad_row = -qb.mean_vector / m
    else:
        h = np.tanh(enc.weights @ u + enc.bias)
        value = float(-(qb.mean_vector @ h))
        grad_row = -(enc.weights.T @ ((1.0 - h * h) * qb.mean_vector)) / m
    return value, np.tile(grad_row, (m, 1))
