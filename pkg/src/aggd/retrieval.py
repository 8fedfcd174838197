"""Exact top-k retrieval, attack metrics and the candidate-set-quality experiment.

Search is exact brute-force inner product over the whole index; corpora at
desk scale are small and the oracle tests demand exactness. Ties rank
corpus rows before adversarial ones, so reported attack success is a lower
bound and never inflated by tie luck.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .attack import (
    build_aggd_candidates,
    build_hotflip_candidates,
    build_random_candidates,
    score_tokens,
)
from .data import TokenSequence
from .encoder import EncoderHandle, encode_passage

ADV_PREFIX = "adv::"


@dataclass(frozen=True, eq=False)
class RetrievalIndex:
    """Corpus plus injected adversarial rows, searched by dot product."""

    ids: tuple[str, ...]
    vectors: np.ndarray  # count x dim float32
    adversarial: frozenset[str]

    def __post_init__(self):
        vec = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if vec.ndim != 2 or vec.shape[0] != len(self.ids):
            raise ValueError("vector rows must match ids")
        if not np.all(np.isfinite(vec)):
            raise ValueError("index vectors contain non-finite entries")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("index ids must be unique")
        object.__setattr__(self, "vectors", vec)

    @property
    def size(self) -> int:
        return len(self.ids)


def build_index(
    corpus_ids: Sequence[str],
    corpus_vectors: np.ndarray,
    adversarial_passages: Sequence[TokenSequence] = (),
    enc: EncoderHandle | None = None,
) -> RetrievalIndex:
    """Stack corpus vectors with freshly encoded adversarial passages (ids ``adv::i``)."""
    corpus_vectors = np.atleast_2d(np.asarray(corpus_vectors, dtype=np.float32))
    ids = [str(i) for i in corpus_ids]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate corpus id")
    rows = [corpus_vectors] if corpus_vectors.size else []
    adv_ids = []
    if adversarial_passages:
        if enc is None:
            raise ValueError("encoding adversarial passages requires an encoder")
        adv = np.stack([encode_passage(enc, p) for p in adversarial_passages]).astype(np.float32)
        if corpus_vectors.size and adv.shape[1] != corpus_vectors.shape[1]:
            raise ValueError(
                f"adversarial dim {adv.shape[1]} does not match corpus dim {corpus_vectors.shape[1]}"
            )
        adv_ids = [f"{ADV_PREFIX}{i}" for i in range(adv.shape[0])]
        rows.append(adv)
    vectors = np.vstack(rows) if rows else corpus_vectors
    return RetrievalIndex(
        ids=tuple(ids + adv_ids), vectors=vectors, adversarial=frozenset(adv_ids)
    )


# RankedList: (passage id, score) pairs, scores non-increasing.
RankedList = list[tuple[str, float]]


def topk(index: RetrievalIndex, query: np.ndarray, k: int) -> RankedList:
    """Exact top-k by dot product; ties rank corpus before adversarial, then by id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = index.vectors @ np.asarray(query, dtype=np.float64)
    picked = heapq.nsmallest(
        min(k, index.size),
        range(index.size),
        key=lambda r: (-scores[r], index.ids[r] in index.adversarial, index.ids[r]),
    )
    return [(index.ids[r], float(scores[r])) for r in picked]


def attack_success_rate(
    index: RetrievalIndex,
    query_vectors: np.ndarray,
    k_values: Sequence[int],
    query_ids: Sequence[str] | None = None,
) -> tuple[dict[int, float], list[dict]]:
    """Fraction of queries retrieving at least one adversarial row in the top k, per k.

    Evaluates one ranking per query at max(k) and reads every smaller k off
    it, which also makes ASR monotone in k by construction.
    """
    query_vectors = np.atleast_2d(np.asarray(query_vectors))
    k_values = sorted(set(int(k) for k in k_values))
    if not k_values:
        raise ValueError("no k values given")
    if query_ids is None:
        query_ids = [str(i) for i in range(query_vectors.shape[0])]
    hits = {k: 0 for k in k_values}
    per_query = []
    for qid, q in zip(query_ids, query_vectors):
        ranked = topk(index, q, k_values[-1])
        first_adv = next(
            (rank for rank, (pid, _) in enumerate(ranked) if pid in index.adversarial), None
        )
        flags = {k: first_adv is not None and first_adv < k for k in k_values}
        for k, flag in flags.items():
            hits[k] += flag
        per_query.append({"id": qid, "hit": {str(k): bool(v) for k, v in flags.items()}})
    n_q = query_vectors.shape[0]
    return {k: hits[k] / n_q for k in k_values}, per_query


@dataclass(frozen=True, eq=False)
class ValidationSet:
    """Gold query-passage pairs with precomputed gold similarities."""

    query_vectors: np.ndarray  # n_val x dim
    gold_vectors: np.ndarray  # n_val x dim
    gold_sims: np.ndarray = field(default=None)

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.query_vectors, dtype=np.float64))
        g = np.atleast_2d(np.asarray(self.gold_vectors, dtype=np.float64))
        if q.shape != g.shape:
            raise ValueError("query and gold vector shapes differ")
        if q.shape[0] == 0:
            raise ValueError("validation set is empty")
        object.__setattr__(self, "query_vectors", q)
        object.__setattr__(self, "gold_vectors", g)
        object.__setattr__(self, "gold_sims", np.einsum("ij,ij->i", q, g))

    @property
    def size(self) -> int:
        return self.query_vectors.shape[0]

    def retacc(self, adv_vectors) -> float:
        """Fraction of pairs whose gold passage strictly outscores every adversarial vector."""
        adv = np.atleast_2d(np.asarray(adv_vectors, dtype=np.float64))
        if adv.shape[0] == 0:
            return 1.0
        best_adv = (self.query_vectors @ adv.T).max(axis=1)
        return float(np.mean(self.gold_sims > best_adv))

    def success(self, adv_vectors) -> float:
        return 1.0 - self.retacc(adv_vectors)


class RetAccResult(NamedTuple):
    retacc: float
    success_rate: float  # 1 - retacc, the training-time success rate


def retrieval_accuracy(validation: ValidationSet, adv_vectors) -> RetAccResult:
    r = validation.retacc(adv_vectors)
    return RetAccResult(retacc=r, success_rate=1.0 - r)


@dataclass
class EvalReport:
    asr: dict[int, float]
    retacc: float | None
    n_q: int
    n_val: int
    per_query: list[dict]

    def to_json(self) -> dict:
        out = {
            "asr": {str(k): v for k, v in sorted(self.asr.items())},
            "retacc": self.retacc,
            "n_q": self.n_q,
            "n_val": self.n_val,
            "per_query": self.per_query,
        }
        return out


QUALITY_STRATEGIES = ("aggd", "hotflip", "random")


@dataclass
class QualityReport:
    """Candidate-set quality over repeated random passages."""

    trials: int
    mean_success: dict[str, float]
    best_count: dict[str, int]
    per_trial: list[dict]  # trial, strategy -> (mean success, contains best)

    def containment_fraction(self, strategy: str) -> float:
        return self.best_count[strategy] / self.trials

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "mean_success": self.mean_success,
            "best_count": self.best_count,
            "containment_fraction": {
                s: self.containment_fraction(s) for s in QUALITY_STRATEGIES
            },
        }


def candidate_quality_experiment(
    enc: EncoderHandle,
    qb,
    validation: ValidationSet,
    trials: int,
    n: int,
    m: int,
    seed: int,
) -> QualityReport:
    """Compare the candidate sets the three strategies would propose from random passages.

    Per trial: draw a uniform random passage, build each strategy's
    candidate set (AGGD at depth 0), score every candidate by its
    validation success rate after the swap, and record which sets contain
    the overall best candidate (ties credit every containing set).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if enc.table is None:
        raise ValueError("candidate quality experiment requires an embedding table")
    k = n // m
    if k < 1:
        raise ValueError("n // m must be >= 1 for the AGGD candidate set")
    rng = np.random.default_rng(seed)
    vocab_size = enc.table.size

    totals = {s: 0.0 for s in QUALITY_STRATEGIES}
    counts = {s: 0 for s in QUALITY_STRATEGIES}
    best_count = {s: 0 for s in QUALITY_STRATEGIES}
    per_trial = []

    for trial in range(trials):
        passage = TokenSequence(rng.integers(0, vocab_size, size=m))
        scores = score_tokens(enc, passage, qb)
        sets = {
            "aggd": build_aggd_candidates(scores, k, depth=0),
            "hotflip": build_hotflip_candidates(scores, int(rng.integers(m)), n),
            "random": build_random_candidates(rng, int(rng.integers(m)), n, vocab_size),
        }
        cache: dict[tuple[int, int], float] = {}

        def success_of(cand) -> float:
            key = (cand.position, cand.token)
            if key not in cache:
                vec = encode_passage(enc, passage.swap(cand.position, cand.token))
                cache[key] = validation.success(vec)
            return cache[key]

        successes = {s: [success_of(c) for c in cands] for s, cands in sets.items()}
        best = max(max(vals) for vals in successes.values() if vals)
        row = {"trial": trial}
        for s in QUALITY_STRATEGIES:
            vals = successes[s]
            totals[s] += sum(vals)
            counts[s] += len(vals)
            contains = bool(vals) and max(vals) == best
            best_count[s] += contains
            row[s] = {"mean_success": sum(vals) / len(vals) if vals else 0.0, "contains_best": contains}
        per_trial.append(row)

    return QualityReport(
        trials=trials,
        mean_success={s: totals[s] / counts[s] if counts[s] else 0.0 for s in QUALITY_STRATEGIES},
        best_count=best_count,
        per_trial=per_trial,
    )
