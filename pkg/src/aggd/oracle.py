"""Brute-force references: global optimum and best single swap by enumeration.

These exist to check the attacks, so they search exhaustively and share
only the loss primitive with the code under test. Both fail fast on search
spaces past ten million evaluations instead of hanging.
"""

from __future__ import annotations

import numpy as np

from .attack import Candidate
from .data import TokenSequence, Vocabulary
from .encoder import MEAN_POOL, TANH_PROJECTION, EncoderHandle, loss

ENUMERATION_GUARD = 10**7
_BATCH = 1 << 17


def _vocab_size(vocab: Vocabulary | int) -> int:
    return vocab.size if isinstance(vocab, Vocabulary) else int(vocab)


def _batch_losses(enc: EncoderHandle, ids: np.ndarray, qb) -> np.ndarray:
    """Losses for a batch of sequences (rows of ids), vectorized over the batch."""
    u = enc.table.vectors[ids].mean(axis=1)
    if enc.kind == TANH_PROJECTION:
        out = np.tanh(u @ enc.weights.T + enc.bias)
    else:
        out = u
    return -(out @ qb.mean_vector)


def brute_force_optimum(enc: EncoderHandle, qb, m: int, vocab: Vocabulary | int) -> tuple[TokenSequence, float]:
    """Exhaustive minimum over all |V|^m sequences; ties go to the lexicographically smallest."""
    size = _vocab_size(vocab)
    total = size**m
    if total > ENUMERATION_GUARD:
        raise ValueError(f"search space |V|^m = {total} exceeds enumeration guard {ENUMERATION_GUARD}")
    shape = (size,) * m
    best_loss = np.inf
    best_ids: tuple[int, ...] | None = None
    if enc.kind in (MEAN_POOL, TANH_PROJECTION):
        for start in range(0, total, _BATCH):
            stop = min(start + _BATCH, total)
            # C-order unraveling enumerates sequences in lexicographic order.
            ids = np.stack(np.unravel_index(np.arange(start, stop), shape), axis=1)
            losses = _batch_losses(enc, ids, qb)
            pick = int(np.argmin(losses))
            if losses[pick] < best_loss:
                best_loss = float(losses[pick])
                best_ids = tuple(int(t) for t in ids[pick])
    else:
        for flat in range(total):
            ids = tuple(int(t) for t in np.unravel_index(flat, shape))
            value = loss(enc, TokenSequence(ids), qb)
            if value < best_loss:
                best_loss = value
                best_ids = ids
    return TokenSequence(best_ids), best_loss


def brute_force_best_swap(enc: EncoderHandle, qb, passage: TokenSequence) -> tuple[Candidate | None, float]:
    """Evaluate all m*|V| single swaps; strict-improvement minimizer, (position, token) tie order."""
    size = enc.table.size if enc.table is not None else None
    if size is None:
        raise ValueError("brute-force swap search requires an embedding table")
    total = len(passage) * size
    if total > ENUMERATION_GUARD:
        raise ValueError(f"swap space m*|V| = {total} exceeds enumeration guard {ENUMERATION_GUARD}")
    current = loss(enc, passage, qb)
    best: Candidate | None = None
    best_loss = current
    for position in range(len(passage)):
        for token in range(size):
            value = loss(enc, passage.swap(position, token), qb)
            if value < best_loss:
                best = Candidate(position, token)
                best_loss = value
    return best, best_loss
