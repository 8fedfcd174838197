"""Run configuration: one TOML or JSON file, with dotted-path flag overrides.

Overrides win over the file so sweeps can mutate a single field cleanly.
Relative paths are resolved against the config file's directory. Validation
errors name the offending field path.
"""

from __future__ import annotations

import json
import shlex
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .attack import AttackConfig

QRELS_ROLES = ("train", "dev", "test", "all")


class ConfigError(Exception):
    """Invalid or incomplete run configuration; message names the field."""


def _require(mapping: Mapping, key: str, section: str) -> Any:
    if key not in mapping:
        raise ConfigError(f"{section}.{key}: required field is missing")
    return mapping[key]


def _reject_unknown(mapping: Mapping, known: Sequence[str], section: str) -> None:
    for key in mapping:
        if key not in known:
            raise ConfigError(f"{section}.{key}: unknown field")


def _resolve(base: Path, value: str) -> str:
    return str((base / value).resolve()) if not Path(value).is_absolute() else value


def _check_exists(path: str, fieldname: str) -> str:
    if not Path(path).exists():
        raise ConfigError(f"{fieldname}: path does not exist: {path}")
    return path


@dataclass(frozen=True)
class DatasetConfig:
    vocab: str
    corpus: str
    queries: str
    qrels: dict[str, str]  # role (train/dev/test/all) -> path

    @classmethod
    def from_dict(cls, raw: Mapping, base: Path) -> "DatasetConfig":
        known = ["vocab", "corpus", "queries", "qrels", "qrels_train", "qrels_dev", "qrels_test"]
        _reject_unknown(raw, known, "dataset")
        qrels: dict[str, str] = {}
        if "qrels" in raw:
            qrels["all"] = _check_exists(_resolve(base, str(raw["qrels"])), "dataset.qrels")
        for role in ("train", "dev", "test"):
            key = f"qrels_{role}"
            if key in raw:
                qrels[role] = _check_exists(_resolve(base, str(raw[key])), f"dataset.{key}")
        if not qrels:
            raise ConfigError("dataset.qrels: at least one qrels file is required")
        return cls(
            vocab=_check_exists(_resolve(base, str(_require(raw, "vocab", "dataset"))), "dataset.vocab"),
            corpus=_check_exists(_resolve(base, str(_require(raw, "corpus", "dataset"))), "dataset.corpus"),
            queries=_check_exists(_resolve(base, str(_require(raw, "queries", "dataset"))), "dataset.queries"),
            qrels=qrels,
        )


@dataclass(frozen=True)
class EncoderConfig:
    kind: str = "mean-pool"
    table: str | None = None  # .npy float matrix
    table_dim: int | None = None  # random table: dimension
    table_seed: int | None = None  # random table: seed
    dim_out: int | None = None  # tanh-projection output width
    params: str | None = None  # .npz with W (dim_out x dim) and b (dim_out)
    params_seed: int | None = None  # seeded uniform [-1, 1] projection
    bridge_cmd: str | None = None  # remote: launch command (or env AGGD_BRIDGE_CMD)
    bridge_tcp: str | None = None  # remote: host:port
    mirror_table: str | None = None  # remote: local copy of the server's embedding table
    timeout: float = 30.0

    @classmethod
    def from_dict(cls, raw: Mapping, base: Path) -> "EncoderConfig":
        known = [
            "kind", "table", "table_dim", "table_seed", "dim_out", "params",
            "params_seed", "bridge_cmd", "bridge_tcp", "mirror_table", "timeout",
        ]
        _reject_unknown(raw, known, "encoder")
        kind = str(raw.get("kind", "mean-pool"))
        if kind not in ("mean-pool", "tanh-projection", "remote"):
            raise ConfigError(f"encoder.kind: unknown kind {kind!r}")
        paths = {}
        for name in ("table", "params", "mirror_table"):
            value = raw.get(name)
            paths[name] = (
                _check_exists(_resolve(base, str(value)), f"encoder.{name}") if value is not None else None
            )
        cfg = cls(
            kind=kind,
            table=paths["table"],
            table_dim=raw.get("table_dim"),
            table_seed=raw.get("table_seed"),
            dim_out=raw.get("dim_out"),
            params=paths["params"],
            params_seed=raw.get("params_seed"),
            bridge_cmd=raw.get("bridge_cmd"),
            bridge_tcp=raw.get("bridge_tcp"),
            mirror_table=paths["mirror_table"],
            timeout=float(raw.get("timeout", 30.0)),
        )
        if kind in ("mean-pool", "tanh-projection"):
            if cfg.table is None and (cfg.table_dim is None or cfg.table_seed is None):
                raise ConfigError("encoder.table: built-in encoders need a table file or table_dim+table_seed")
        if kind == "tanh-projection":
            if cfg.params is None and cfg.params_seed is None:
                raise ConfigError("encoder.params: tanh-projection needs params or params_seed")
            if cfg.params is None and cfg.dim_out is None:
                raise ConfigError("encoder.dim_out: required with params_seed")
        return cfg

    def bridge_argv(self) -> list[str] | None:
        return shlex.split(self.bridge_cmd) if self.bridge_cmd else None


@dataclass(frozen=True)
class EvalConfig:
    k_r: tuple[int, ...] = (1000,)
    asr_split: str = "test"
    val_split: str = "dev"
    corpus_embeddings: str | None = None
    query_embeddings: str | None = None

    @classmethod
    def from_dict(cls, raw: Mapping, base: Path) -> "EvalConfig":
        known = ["k_r", "asr_split", "val_split", "corpus_embeddings", "query_embeddings"]
        _reject_unknown(raw, known, "eval")
        k_r = raw.get("k_r", [1000])
        if not isinstance(k_r, (list, tuple)) or not k_r or any(int(k) < 1 for k in k_r):
            raise ConfigError("eval.k_r: must be a non-empty list of k >= 1")
        paths = {}
        for name in ("corpus_embeddings", "query_embeddings"):
            value = raw.get(name)
            paths[name] = (
                _check_exists(_resolve(base, str(value)), f"eval.{name}") if value is not None else None
            )
        return cls(
            k_r=tuple(int(k) for k in k_r),
            asr_split=str(raw.get("asr_split", "test")),
            val_split=str(raw.get("val_split", "dev")),
            corpus_embeddings=paths["corpus_embeddings"],
            query_embeddings=paths["query_embeddings"],
        )


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetConfig
    encoder: EncoderConfig
    attack: AttackConfig
    eval: EvalConfig
    clusters: int
    output_dir: str
    base: str = "."  # directory that relative config paths resolve against
    raw: dict = field(repr=False, compare=False, default_factory=dict)

    @classmethod
    def from_dict(cls, raw: Mapping, base: Path) -> "RunConfig":
        known = ["dataset", "encoder", "attack", "eval", "clusters", "output_dir"]
        _reject_unknown(raw, known, "config")
        attack_raw = dict(raw.get("attack", {}))
        _reject_unknown(
            attack_raw,
            ["strategy", "m", "n", "iterations", "seed", "init", "init_token", "log_eval_every"],
            "attack",
        )
        try:
            attack = AttackConfig(**attack_raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"attack: {exc}") from exc
        clusters = int(raw.get("clusters", 1))
        if clusters < 1:
            raise ConfigError("clusters: must be >= 1")
        output_dir = raw.get("output_dir")
        if not output_dir:
            raise ConfigError("output_dir: required field is missing")
        return cls(
            dataset=DatasetConfig.from_dict(_require(raw, "dataset", "config"), base),
            encoder=EncoderConfig.from_dict(dict(raw.get("encoder", {})), base),
            attack=attack,
            eval=EvalConfig.from_dict(dict(raw.get("eval", {})), base),
            clusters=clusters,
            output_dir=_resolve(base, str(output_dir)),
            base=str(base),
            raw=dict(raw),
        )


def parse_override(spec: str) -> tuple[list[str], Any]:
    """Parse a ``dotted.path=value`` override; values parse as JSON, else string."""
    if "=" not in spec:
        raise ConfigError(f"override {spec!r} is not of the form path=value")
    path, raw_value = spec.split("=", 1)
    keys = [k for k in path.strip().split(".") if k]
    if not keys:
        raise ConfigError(f"override {spec!r} has an empty path")
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value
    return keys, value


def apply_overrides(raw: dict, overrides: Sequence[str]) -> dict:
    out = json.loads(json.dumps(raw))  # deep copy, JSON-compatible by construction
    for spec in overrides:
        keys, value = parse_override(spec)
        node = out
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {spec!r} descends through a non-table value")
        node[keys[-1]] = value
    return out


def load_run_config(path: str | Path, overrides: Sequence[str] = ()) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file does not exist: {path}")
    if path.suffix.lower() == ".json":
        raw = json.loads(path.read_text(encoding="utf-8"))
    else:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a table/object")
    raw = apply_overrides(raw, overrides)
    return RunConfig.from_dict(raw, base=path.parent)
