"""The three token-swap attacks sharing one greedy evaluate-and-accept loop.

All strategies maintain a fixed-length adversarial passage and, per
iteration, propose a candidate set of (position, token) swaps, evaluate the
true loss of every proposal, and accept the best strict improvement:

* ``aggd`` scores every vocabulary token at every position from one
  gradient evaluation, proposes the per-position rank window
  ``[d*k, (d+1)*k)`` (k = n // m), resets the depth ``d`` to 0 on every
  accepted swap and deepens it on rejection. The search is deterministic
  given the passage, never re-scores a window it already rejected, and
  stops early once the windows have swept the whole vocabulary.
* ``hotflip`` samples one position uniformly and proposes the top-n
  gradient-scored tokens there.
* ``random`` samples one position uniformly and proposes n uniform tokens,
  using no gradient information at all.

Accepted losses are strictly decreasing by construction; the gradient is
recomputed only when the passage actually changed.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Dataset, TokenSequence, Vocabulary, tokenize
from .encoder import EncoderHandle, encode_passage, loss, loss_gradient

log = logging.getLogger(__name__)

STRATEGIES = ("aggd", "hotflip", "random")
INIT_MODES = ("uniform-random", "fixed-token", "corpus-sample")


@dataclass(frozen=True)
class AttackConfig:
    m: int = 30
    n: int = 150
    iterations: int = 2000
    strategy: str = "aggd"
    seed: int = 0
    init: str = "uniform-random"
    init_token: int | None = None
    log_eval_every: int = 0  # iterations between validation RetAcc samples, 0 = off

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.init not in INIT_MODES:
            raise ValueError(f"unknown init mode {self.init!r}")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.iterations < 1:
            raise ValueError("iteration budget must be >= 1")
        if self.strategy == "aggd" and self.n < self.m:
            raise ValueError(f"aggd requires n >= m so that k = n // m >= 1 (got n={self.n}, m={self.m})")
        if self.init == "fixed-token" and self.init_token is None:
            raise ValueError("fixed-token init requires init_token")
        if self.log_eval_every < 0:
            raise ValueError("log_eval_every must be >= 0")


@dataclass(frozen=True, order=True)
class Candidate:
    """One proposed swap: put ``token`` at ``position``."""

    position: int
    token: int


# ScoreMatrix: m x |V| float64, entry (i, v) = first-order gain of putting token v at position i.
ScoreMatrix = np.ndarray


@dataclass
class TraceRecord:
    iteration: int
    loss: float
    accepted: bool
    depth: int  # tier searched this iteration (0 for hotflip/random)
    evaluated: int
    wall_ms: float
    retacc: float | None = None


@dataclass
class AttackTrace:
    strategy: str
    records: list[TraceRecord] = field(default_factory=list)
    exhausted: bool = False

    @property
    def final_loss(self) -> float:
        return self.records[-1].loss

    def accepted_losses(self) -> list[float]:
        return [r.loss for r in self.records if r.accepted]


def init_passage(
    config: AttackConfig,
    vocab: Vocabulary,
    corpus: Dataset | Sequence[str] | None = None,
    *,
    rng: np.random.Generator | None = None,
) -> TokenSequence:
    """Build the starting passage according to the configured init mode."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if config.init == "fixed-token":
        token = int(config.init_token)
        if not 0 <= token < vocab.size:
            raise ValueError(f"init token {token} out of range for vocabulary of size {vocab.size}")
        return TokenSequence([token] * config.m)
    if config.init == "corpus-sample":
        if corpus is None:
            raise ValueError("corpus-sample init requires a corpus")
        if isinstance(corpus, Dataset):
            texts = [corpus.passage_text(pid) for pid in corpus.corpus]
        else:
            texts = list(corpus)
        if not texts:
            raise ValueError("corpus-sample init requires a non-empty corpus")
        seq = tokenize(texts[int(rng.integers(len(texts)))], vocab)
        ids = list(seq.ids[: config.m])
        ids.extend([vocab.unk_id] * (config.m - len(ids)))
        return TokenSequence(ids)
    return TokenSequence(rng.integers(0, vocab.size, size=config.m))


def score_tokens(enc: EncoderHandle, passage: TokenSequence, qb) -> ScoreMatrix:
    """First-order swap scores for every (position, vocabulary token) pair.

    One gradient evaluation; entry (i, v) is the negated dot product of
    token v's embedding with the gradient row at position i, so higher
    scores predict larger loss reductions.
    """
    if enc.table is None:
        raise ValueError("token scoring requires an embedding table (mirror one for remote encoders)")
    _, grad = loss_gradient(enc, passage, qb)
    return -(grad @ enc.table.vectors.T)


def _ranked_tokens(score_row: np.ndarray) -> np.ndarray:
    # Descending score, ties broken by ascending token id.
    return np.lexsort((np.arange(score_row.shape[0]), -score_row))


def build_aggd_candidates(scores: ScoreMatrix, k: int, depth: int) -> list[Candidate]:
    """Per-position rank window [depth*k, (depth+1)*k), unioned over positions."""
    if k < 1:
        raise ValueError("per-position candidate count k must be >= 1")
    m, vocab_size = scores.shape
    lo = depth * k
    hi = min(lo + k, vocab_size)
    if lo >= vocab_size:
        return []
    out = []
    for position in range(m):
        for token in _ranked_tokens(scores[position])[lo:hi]:
            out.append(Candidate(position, int(token)))
    return out


def build_hotflip_candidates(scores: ScoreMatrix, position: int, n: int) -> list[Candidate]:
    """Top-n gradient-scored tokens at one position."""
    m, vocab_size = scores.shape
    if not 0 <= position < m:
        raise ValueError(f"position {position} out of range for passage length {m}")
    ranked = _ranked_tokens(scores[position])[: min(n, vocab_size)]
    return [Candidate(position, int(token)) for token in ranked]


def build_random_candidates(
    rng: np.random.Generator, position: int, n: int, vocab: Vocabulary | int
) -> list[Candidate]:
    """n tokens sampled uniformly with replacement at one position (duplicates collapse)."""
    if position < 0:
        raise ValueError(f"position {position} out of range")
    size = vocab.size if isinstance(vocab, Vocabulary) else int(vocab)
    tokens = rng.integers(0, size, size=n) if n > 0 else []
    return [Candidate(position, t) for t in sorted({int(t) for t in tokens})]


def best_candidate(
    enc: EncoderHandle,
    passage: TokenSequence,
    qb,
    candidates: Sequence[Candidate],
) -> tuple[Candidate | None, float]:
    """Evaluate the true loss of every proposed swap; return the strict-improvement minimizer.

    One encoder pass per candidate. Ties break by ascending (position,
    token), which makes the reduction order-independent. Returns
    (None, current loss) when nothing strictly improves. Remote encoders
    evaluate through the bridge's pipeline window instead of one call per
    swap.
    """
    current = loss(enc, passage, qb)
    ordered = sorted(candidates)
    if enc.kind == "remote":
        swapped = [passage.swap(c.position, c.token) for c in ordered]
        values = [v for v, _ in enc.session.loss_and_grad_many(swapped, qb)]
    else:
        values = [loss(enc, passage.swap(c.position, c.token), qb) for c in ordered]
    best: Candidate | None = None
    best_loss = current
    for cand, value in zip(ordered, values):
        if value < best_loss:
            best = cand
            best_loss = value
    return best, best_loss


def run_attack(
    enc: EncoderHandle,
    qb,
    config: AttackConfig,
    vocab: Vocabulary,
    validation=None,
    corpus: Dataset | Sequence[str] | None = None,
) -> tuple[TokenSequence, AttackTrace]:
    """Run one attack to its iteration budget (or AGGD tier exhaustion).

    ``validation``, when given, must expose ``retacc(vectors) -> float``;
    it is sampled every ``config.log_eval_every`` iterations.
    """
    rng = np.random.default_rng(config.seed)
    passage = init_passage(config, vocab, corpus, rng=rng)
    current = loss(enc, passage, qb)
    trace = AttackTrace(strategy=config.strategy)

    k = 0
    if config.strategy == "aggd":
        k = config.n // config.m
        if config.n % config.m:
            log.warning(
                "candidate budget n=%d is not a multiple of m=%d; using k=%d and dropping the remainder",
                config.n, config.m, k,
            )

    depth = 0
    scores: ScoreMatrix | None = None

    for iteration in range(config.iterations):
        started = time.perf_counter()

        if config.strategy == "aggd":
            if depth * k >= vocab.size:
                trace.exhausted = True
                break
            if scores is None:
                scores = score_tokens(enc, passage, qb)
            candidates = build_aggd_candidates(scores, k, depth)
            searched_depth = depth
        elif config.strategy == "hotflip":
            position = int(rng.integers(config.m))
            if scores is None:
                scores = score_tokens(enc, passage, qb)
            candidates = build_hotflip_candidates(scores, position, config.n)
            searched_depth = 0
        else:  # random
            position = int(rng.integers(config.m))
            candidates = build_random_candidates(rng, position, config.n, vocab)
            searched_depth = 0

        best, best_loss = best_candidate(enc, passage, qb, candidates)
        if best is not None:
            passage = passage.swap(best.position, best.token)
            current = best_loss
            depth = 0
            scores = None
            accepted = True
        else:
            if config.strategy == "aggd":
                depth += 1
            accepted = False

        record = TraceRecord(
            iteration=iteration,
            loss=current,
            accepted=accepted,
            depth=searched_depth,
            evaluated=len(candidates),
            wall_ms=(time.perf_counter() - started) * 1000.0,
        )
        if validation is not None and config.log_eval_every and iteration % config.log_eval_every == 0:
            record.retacc = validation.retacc(encode_passage(enc, passage))
        trace.records.append(record)

    return passage, trace
