"""Shared fixture builders for the test suite."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from aggd.data import TokenSequence, Vocabulary
from aggd.encoder import (
    EmbeddingTable,
    QueryBundle,
    mean_pool_encoder,
    seeded_tanh_encoder,
)

# The worked example used throughout: three tokens in 2-d, one query (2, 0).
TOY_TABLE = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 0.0]])


def toy_mean_pool():
    enc = mean_pool_encoder(EmbeddingTable(TOY_TABLE))
    qb = QueryBundle.from_vectors([[2.0, 0.0]])
    vocab = Vocabulary(tokens=("a", "b", "c"), unk_id=0)
    return enc, qb, vocab


def random_mean_pool(rng: np.random.Generator, vocab_size: int, dim: int, n_queries: int = 3):
    table = EmbeddingTable(rng.uniform(-1.0, 1.0, size=(vocab_size, dim)))
    qb = QueryBundle.from_vectors(rng.uniform(-1.0, 1.0, size=(n_queries, dim)))
    return mean_pool_encoder(table), qb


def random_tanh(rng: np.random.Generator, vocab_size: int, dim: int, dim_out: int, n_queries: int = 3):
    table = EmbeddingTable(rng.uniform(-1.0, 1.0, size=(vocab_size, dim)))
    enc = seeded_tanh_encoder(table, dim_out, seed=int(rng.integers(2**31)))
    qb = QueryBundle.from_vectors(rng.uniform(-1.0, 1.0, size=(n_queries, dim_out)))
    return enc, qb


def random_sequence(rng: np.random.Generator, vocab_size: int, m: int) -> TokenSequence:
    return TokenSequence(rng.integers(0, vocab_size, size=m))


def write_eval_fixture(root: Path) -> dict:
    """Five-token dataset whose metrics are known by hand.

    Passages p1=(2,0), p2=(0,2); queries q1=(1,0), q2=(0,1); the planted
    adversarial passage encodes to (1.9, 0). Expected: ASR(1)=0, ASR(2)=0.5,
    RetAcc=1.0.
    """
    root.mkdir(parents=True, exist_ok=True)
    (root / "vocab.txt").write_text("t0\nt1\nt2\nt3\nt4\n", encoding="utf-8")
    table = np.array([[2.0, 0.0], [0.0, 2.0], [1.9, 0.0], [1.0, 0.0], [0.0, 1.0]])
    np.save(root / "table.npy", table)
    with (root / "corpus.jsonl").open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"_id": "p1", "title": "", "text": "t0"}) + "\n")
        fh.write(json.dumps({"_id": "p2", "title": "", "text": "t1"}) + "\n")
    with (root / "queries.jsonl").open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"_id": "q1", "text": "t3"}) + "\n")
        fh.write(json.dumps({"_id": "q2", "text": "t4"}) + "\n")
    (root / "qrels.tsv").write_text(
        "query-id\tcorpus-id\tscore\nq1\tp1\t1\nq2\tp2\t1\n", encoding="utf-8"
    )
    passage = {"id": "adv::0", "cluster": 0, "token_ids": [2], "text": "t2", "final_loss": 0.0}
    (root / "passage_000.json").write_text(json.dumps(passage) + "\n", encoding="utf-8")
    config = {
        "output_dir": str(root / "out"),
        "dataset": {
            "vocab": "vocab.txt",
            "corpus": "corpus.jsonl",
            "queries": "queries.jsonl",
            "qrels": "qrels.tsv",
        },
        "encoder": {"kind": "mean-pool", "table": "table.npy"},
        "attack": {"strategy": "aggd", "m": 1, "n": 1, "iterations": 3, "seed": 0},
        "eval": {"k_r": [1, 2]},
    }
    (root / "config.json").write_text(json.dumps(config, indent=2), encoding="utf-8")
    return {
        "root": root,
        "config": root / "config.json",
        "passage": root / "passage_000.json",
        "table": table,
    }
