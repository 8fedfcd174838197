"""Vocabulary, tokenization, BEIR-style dataset ingestion and the embedding cache.

The desk-scale text pipeline is deliberately minimal: lowercase,
whitespace-split, unknown pieces collapse to ``unk_id``. Attacks operate on
token ids, so surface tokenization fidelity does not matter here; real
subword tokenization happens on the far side of the bridge.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

CACHE_MAGIC = b"AGGDEMB1"


class DataFormatError(ValueError):
    """A file did not match its expected on-disk layout."""


@dataclass(frozen=True)
class Vocabulary:
    """Ordered token list; ids are line indices."""

    tokens: tuple[str, ...]
    unk_id: int
    index: Mapping[str, int] = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if not self.tokens:
            raise DataFormatError("vocabulary is empty")
        index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            seen = set()
            for tok in self.tokens:
                if tok in seen:
                    raise DataFormatError(f"duplicate token {tok!r} in vocabulary")
                seen.add(tok)
        if not 0 <= self.unk_id < len(self.tokens):
            raise ValueError(f"unk_id {self.unk_id} out of range for size {len(self.tokens)}")
        object.__setattr__(self, "index", index)

    @property
    def size(self) -> int:
        return len(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class TokenSequence:
    """Fixed sequence of token ids; the object being optimized by an attack."""

    ids: tuple[int, ...]

    def __init__(self, ids: Iterable[int]):
        object.__setattr__(self, "ids", tuple(int(i) for i in ids))

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self):
        return iter(self.ids)

    def swap(self, position: int, token: int) -> "TokenSequence":
        if not 0 <= position < len(self.ids):
            raise IndexError(f"position {position} out of range for length {len(self.ids)}")
        ids = list(self.ids)
        ids[position] = int(token)
        return TokenSequence(ids)


def load_vocabulary(path: str | Path) -> Vocabulary:
    """Read one token per line; ids by line order, unk is the literal ``[UNK]`` line (else 0)."""
    text = Path(path).read_text(encoding="utf-8")
    tokens = text.splitlines()
    if not tokens:
        raise DataFormatError(f"{path}: empty vocabulary file")
    for i, tok in enumerate(tokens):
        if tok == "":
            raise DataFormatError(f"{path}: empty token at line {i + 1}")
    unk_id = tokens.index("[UNK]") if "[UNK]" in tokens else 0
    return Vocabulary(tokens=tuple(tokens), unk_id=unk_id)


def tokenize(text: str, vocab: Vocabulary) -> TokenSequence:
    """Lowercase, split on whitespace, map unknown pieces to ``unk_id``."""
    return TokenSequence(vocab.index.get(piece, vocab.unk_id) for piece in text.lower().split())


def detokenize(seq: TokenSequence, vocab: Vocabulary) -> str:
    """Join token strings with single spaces; inverse of :func:`tokenize` for in-vocab text."""
    pieces = []
    for i in seq.ids:
        if not 0 <= i < vocab.size:
            raise ValueError(f"token id {i} out of range for vocabulary of size {vocab.size}")
        pieces.append(vocab.tokens[i])
    return " ".join(pieces)


@dataclass(frozen=True)
class Dataset:
    """Corpus, queries and positive relevance judgments, with split labels per query."""

    corpus: dict[str, tuple[str, str]]  # passage id -> (title, text)
    queries: dict[str, str]  # query id -> text
    qrels: frozenset[tuple[str, str, int]]  # (query id, passage id, relevance >= 1)
    split_of: dict[str, str]  # query id -> split label

    def passage_text(self, pid: str) -> str:
        title, text = self.corpus[pid]
        return f"{title} {text}" if title else text

    def query_ids(self, split: str | None = None) -> list[str]:
        """Query ids carrying qrels, optionally restricted to one split, in file order."""
        if split is None:
            labelled = set(self.split_of)
            return [q for q in self.queries if q in labelled]
        return [q for q in self.queries if self.split_of.get(q) == split]

    def gold_pairs(self, split: str | None = None) -> list[tuple[str, str]]:
        """(query id, gold passage id) pairs, ordered by query then passage id."""
        wanted = set(self.query_ids(split))
        return sorted((q, p) for q, p, _ in self.qrels if q in wanted)


def _read_jsonl(path: Path, required: tuple[str, ...]) -> list[dict]:
    records = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            for key in required:
                if key not in rec:
                    raise DataFormatError(f"{path}:{lineno}: missing field {key!r}")
            records.append(rec)
    return records


def _read_qrels(path: Path) -> list[tuple[str, str, int]]:
    rows = []
    with path.open(encoding="utf-8") as fh:
        header = fh.readline()
        if not header.strip():
            raise DataFormatError(f"{path}: missing qrels header")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise DataFormatError(f"{path}:{lineno}: expected 3 tab-separated fields")
            qid, pid, score = parts
            try:
                rows.append((qid, pid, int(score)))
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: non-integer score {score!r}") from exc
    return rows


def load_dataset(
    corpus_path: str | Path,
    queries_path: str | Path,
    qrels_paths: str | Path | Mapping[str, str | Path],
) -> Dataset:
    """Load newline-delimited JSON corpus/queries plus one or more TSV qrels files.

    ``qrels_paths`` may be a single path (all judged queries get split label
    ``"all"``) or a mapping of split label to path. Zero-score rows are
    dropped; every surviving row must reference existing ids.
    """
    corpus_path, queries_path = Path(corpus_path), Path(queries_path)
    corpus: dict[str, tuple[str, str]] = {}
    for rec in _read_jsonl(corpus_path, required=("_id", "text")):
        pid = str(rec["_id"])
        if pid in corpus:
            raise DataFormatError(f"{corpus_path}: duplicate passage id {pid!r}")
        corpus[pid] = (str(rec.get("title", "")), str(rec["text"]))

    queries: dict[str, str] = {}
    for rec in _read_jsonl(queries_path, required=("_id", "text")):
        qid = str(rec["_id"])
        if qid in queries:
            raise DataFormatError(f"{queries_path}: duplicate query id {qid!r}")
        queries[qid] = str(rec["text"])

    if isinstance(qrels_paths, (str, Path)):
        qrels_paths = {"all": qrels_paths}

    qrels: set[tuple[str, str, int]] = set()
    split_of: dict[str, str] = {}
    for split, path in qrels_paths.items():
        for qid, pid, score in _read_qrels(Path(path)):
            if score == 0:
                continue
            if qid not in queries:
                raise DataFormatError(f"{path}: qrel references unknown query id {qid!r}")
            if pid not in corpus:
                raise DataFormatError(f"{path}: qrel references unknown passage id {pid!r}")
            prior = split_of.get(qid)
            if prior is not None and prior != split:
                raise DataFormatError(f"{path}: query {qid!r} assigned to both {prior!r} and {split!r}")
            split_of[qid] = split
            qrels.add((qid, pid, score))
    return Dataset(corpus=corpus, queries=queries, qrels=frozenset(qrels), split_of=split_of)


@dataclass(frozen=True, eq=False)
class EmbeddingCache:
    """Float32 passage vectors keyed by id, persisted in a small binary format."""

    ids: tuple[str, ...]
    vectors: np.ndarray  # count x dim, float32

    def __post_init__(self):
        vec = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if vec.ndim != 2:
            raise ValueError("vectors must be a 2-D matrix")
        if vec.shape[0] != len(self.ids):
            raise ValueError(f"{vec.shape[0]} vector rows for {len(self.ids)} ids")
        if not np.all(np.isfinite(vec)):
            raise ValueError("vectors contain non-finite entries")
        object.__setattr__(self, "vectors", vec)
        object.__setattr__(self, "ids", tuple(self.ids))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def write_embedding_cache(cache: EmbeddingCache, path: str | Path) -> None:
    count, dim = cache.vectors.shape
    with Path(path).open("wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<II", count, dim))
        fh.write(cache.vectors.astype("<f4", copy=False).tobytes(order="C"))
        for pid in cache.ids:
            raw = pid.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)


def read_embedding_cache(path: str | Path) -> EmbeddingCache:
    path = Path(path)
    data = path.read_bytes()
    if data[:8] != CACHE_MAGIC:
        raise DataFormatError(f"{path}: bad magic")
    if len(data) < 16:
        raise DataFormatError(f"{path}: truncated header")
    count, dim = struct.unpack_from("<II", data, 8)
    offset = 16
    nbytes = count * dim * 4
    if len(data) < offset + nbytes:
        raise DataFormatError(f"{path}: truncated vector block")
    vectors = np.frombuffer(data, dtype="<f4", count=count * dim, offset=offset).reshape(count, dim)
    offset += nbytes
    ids = []
    for _ in range(count):
        if len(data) < offset + 4:
            raise DataFormatError(f"{path}: truncated id block")
        (length,) = struct.unpack_from("<I", data, offset)
        offset += 4
        if len(data) < offset + length:
            raise DataFormatError(f"{path}: truncated id block")
        ids.append(data[offset : offset + length].decode("utf-8"))
        offset += length
    if offset != len(data):
        raise DataFormatError(f"{path}: {len(data) - offset} trailing bytes")
    return EmbeddingCache(ids=tuple(ids), vectors=vectors.copy())
