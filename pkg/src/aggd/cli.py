"""Command-line front end: attack, evaluate, analyze-candidates, sweep.

Every command reads one TOML/JSON run config (plus ``--set`` overrides,
which win), writes CSV/JSON artifacts into its output directory, renders
figures next to them, and records a manifest sufficient to reproduce the
run. Existing output directories are never overwritten without --force.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .attack import AttackConfig, AttackTrace, run_attack
from .bridge import BridgeError, BridgeSession
from .clustering import kmeans
from .config import ConfigError, RunConfig, apply_overrides, load_run_config
from .data import (
    DataFormatError,
    Dataset,
    TokenSequence,
    Vocabulary,
    detokenize,
    load_dataset,
    load_vocabulary,
    read_embedding_cache,
    tokenize,
)
from .encoder import (
    EmbeddingTable,
    EncoderHandle,
    QueryBundle,
    encode_passage,
    encode_queries,
    mean_pool_encoder,
    remote_encoder,
    seeded_tanh_encoder,
    tanh_encoder,
)
from .oracle import brute_force_best_swap, brute_force_optimum
from .retrieval import (
    EvalReport,
    ValidationSet,
    attack_success_rate,
    build_index,
    candidate_quality_experiment,
)

MANIFEST_FORMAT = "1"
BRIDGE_CMD_ENV = "AGGD_BRIDGE_CMD"


# -- runtime construction ----------------------------------------------------


def _load_vocab(cfg: RunConfig) -> Vocabulary:
    return load_vocabulary(cfg.dataset.vocab)


def _load_data(cfg: RunConfig) -> Dataset:
    return load_dataset(cfg.dataset.corpus, cfg.dataset.queries, cfg.dataset.qrels)


def _load_table(cfg: RunConfig, vocab: Vocabulary) -> EmbeddingTable:
    enc_cfg = cfg.encoder
    if enc_cfg.table is not None:
        table = EmbeddingTable(np.load(enc_cfg.table))
    else:
        rng = np.random.default_rng(enc_cfg.table_seed)
        table = EmbeddingTable(rng.uniform(-1.0, 1.0, size=(vocab.size, enc_cfg.table_dim)))
    if table.size != vocab.size:
        raise ConfigError(
            f"encoder.table: {table.size} rows for a vocabulary of {vocab.size} tokens"
        )
    return table


def build_encoder(cfg: RunConfig, vocab: Vocabulary) -> EncoderHandle:
    enc_cfg = cfg.encoder
    if enc_cfg.kind == "mean-pool":
        return mean_pool_encoder(_load_table(cfg, vocab))
    if enc_cfg.kind == "tanh-projection":
        table = _load_table(cfg, vocab)
        if enc_cfg.params is not None:
            params = np.load(enc_cfg.params)
            return tanh_encoder(table, params["W"], params["b"])
        return seeded_tanh_encoder(table, enc_cfg.dim_out, enc_cfg.params_seed)
    # remote
    if enc_cfg.bridge_tcp:
        host, _, port = enc_cfg.bridge_tcp.rpartition(":")
        session = BridgeSession.connect(host or "127.0.0.1", int(port), timeout=enc_cfg.timeout)
    else:
        argv = enc_cfg.bridge_argv()
        if argv is None:
            env_cmd = os.environ.get(BRIDGE_CMD_ENV)
            if not env_cmd:
                raise ConfigError(
                    f"encoder.bridge_cmd: required for remote encoders (or set {BRIDGE_CMD_ENV})"
                )
            import shlex

            argv = shlex.split(env_cmd)
        session = BridgeSession.spawn(argv, timeout=enc_cfg.timeout)
    session.handshake_info()
    if session.vocab_size != vocab.size:
        raise ConfigError(
            f"dataset.vocab: {vocab.size} tokens but the bridge reports {session.vocab_size}"
        )
    mirror = EmbeddingTable(np.load(enc_cfg.mirror_table)) if enc_cfg.mirror_table else None
    return remote_encoder(session, mirrored_table=mirror)


def _resolve_split(dataset: Dataset, wanted: str, fieldname: str) -> str:
    if dataset.query_ids(wanted):
        return wanted
    if dataset.query_ids("all"):
        return "all"
    raise ConfigError(f"{fieldname}: no queries with qrels in split {wanted!r}")


def _query_vectors(enc: EncoderHandle, vocab: Vocabulary, dataset: Dataset, qids) -> np.ndarray:
    return np.stack([encode_passage(enc, tokenize(dataset.queries[q], vocab)) for q in qids])


def _corpus_vector_map(cfg: RunConfig, enc: EncoderHandle, vocab: Vocabulary, dataset: Dataset):
    """(ordered ids, vectors) for the retrieval index, from cache or the encoder."""
    if cfg.eval.corpus_embeddings:
        cache = read_embedding_cache(cfg.eval.corpus_embeddings)
        return list(cache.ids), np.asarray(cache.vectors, dtype=np.float64)
    if enc.kind == "remote":
        raise ConfigError(
            "eval.corpus_embeddings: required for remote encoders (the bridge cannot tokenize corpus text)"
        )
    ids = list(dataset.corpus)
    vectors = np.stack([encode_passage(enc, tokenize(dataset.passage_text(p), vocab)) for p in ids])
    return ids, vectors


def _validation_set(cfg: RunConfig, enc: EncoderHandle, vocab: Vocabulary, dataset: Dataset) -> ValidationSet | None:
    split = cfg.eval.val_split
    if not dataset.query_ids(split):
        split = "all" if dataset.query_ids("all") else None
    if split is None:
        return None
    pairs = dataset.gold_pairs(split)
    if not pairs:
        return None
    if cfg.eval.corpus_embeddings:
        cache = read_embedding_cache(cfg.eval.corpus_embeddings)
        row_of = {pid: i for i, pid in enumerate(cache.ids)}
        missing = [pid for _, pid in pairs if pid not in row_of]
        if missing:
            raise ConfigError(f"eval.corpus_embeddings: missing gold passage id {missing[0]!r}")
        gold = np.asarray(cache.vectors, dtype=np.float64)[[row_of[pid] for _, pid in pairs]]
    else:
        gold = np.stack(
            [encode_passage(enc, tokenize(dataset.passage_text(pid), vocab)) for _, pid in pairs]
        )
    queries = _query_vectors(enc, vocab, dataset, [qid for qid, _ in pairs])
    return ValidationSet(query_vectors=queries, gold_vectors=gold)


# -- artifact writers ---------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def _prepare_out_dir(path: str | Path, force: bool) -> Path:
    out = Path(path)
    if out.exists() and any(out.iterdir()):
        if not force:
            raise ConfigError(f"output_dir: {out} already exists and is not empty (use --force)")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, cfg: RunConfig, command: str, extra: dict | None = None) -> None:
    manifest = {
        "format_version": MANIFEST_FORMAT,
        "tool": {"name": "aggd", "version": __version__},
        "command": command,
        "seed": cfg.attack.seed,
        "config": cfg.raw,
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_trace_csv(path: str | Path, trace: AttackTrace, include_retacc: bool) -> None:
    """Deterministic per-iteration record; wall-clock timing lives in the timing CSV."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["iter", "loss", "accepted", "depth", "evaluated"]
        if include_retacc:
            header.append("retacc")
        writer.writerow(header)
        for r in trace.records:
            row = [r.iteration, _fmt(r.loss), int(r.accepted), r.depth, r.evaluated]
            if include_retacc:
                row.append("" if r.retacc is None else _fmt(r.retacc))
            writer.writerow(row)


def write_timing_csv(path: str | Path, trace: AttackTrace) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iter", "wall_ms"])
        for r in trace.records:
            writer.writerow([r.iteration, f"{r.wall_ms:.3f}"])


def _write_passage(path: Path, index: int, cluster: int, passage: TokenSequence, vocab: Vocabulary, final_loss: float) -> None:
    payload = {
        "id": f"adv::{index}",
        "cluster": cluster,
        "token_ids": list(passage.ids),
        "text": detokenize(passage, vocab),
        "final_loss": final_loss,
    }
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_passages(source: str | Path) -> list[TokenSequence]:
    """Read adversarial passages from a run directory or a single passage JSON file.

    The literal source ``none`` selects the empty set, for baseline
    evaluations of the clean corpus.
    """
    if str(source) == "none":
        return []
    source = Path(source)
    files = sorted(source.glob("passage_*.json")) if source.is_dir() else [source]
    if not files:
        raise ConfigError(f"no passage_*.json files under {source}")
    passages = []
    for f in files:
        payload = json.loads(f.read_text(encoding="utf-8"))
        passages.append(TokenSequence(payload["token_ids"]))
    return passages


def _derived_seeds(seed: int, count: int) -> list[int]:
    return [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


# -- commands ------------------------------------------------------------------


def cmd_attack(cfg: RunConfig, force: bool = False, figures: bool = True) -> Path:
    """Train one adversarial passage per query cluster and write all run artifacts."""
    vocab = _load_vocab(cfg)
    dataset = _load_data(cfg)
    enc = build_encoder(cfg, vocab)
    out = _prepare_out_dir(cfg.output_dir, force)

    train_split = _resolve_split(dataset, "train", "attack train queries")
    train_qids = dataset.query_ids(train_split)
    if not train_qids:
        raise ConfigError("dataset.qrels: no training queries available")

    validation = None
    if cfg.attack.log_eval_every > 0:
        validation = _validation_set(cfg, enc, vocab, dataset)
        if validation is None:
            raise ConfigError("eval.val_split: validation pairs required when attack.log_eval_every > 0")

    if cfg.clusters > 1:
        if enc.kind == "remote":
            raise ConfigError("clusters: query clustering needs local query vectors; use a built-in encoder")
        if cfg.clusters > len(train_qids):
            raise ConfigError(f"clusters: {cfg.clusters} clusters for {len(train_qids)} training queries")
        vectors = _query_vectors(enc, vocab, dataset, train_qids)
        clustering = kmeans(vectors, k=cfg.clusters, seed=cfg.attack.seed)
        bundles = [
            QueryBundle.from_vectors(vectors[clustering.members(c)]) for c in range(cfg.clusters)
        ]
        seeds = _derived_seeds(cfg.attack.seed, cfg.clusters)
    else:
        if enc.kind == "remote":
            bundles = [encode_queries(enc, [dataset.queries[q] for q in train_qids])]
        else:
            bundles = [encode_queries(enc, [tokenize(dataset.queries[q], vocab) for q in train_qids])]
        seeds = [cfg.attack.seed]

    for i, (qb, seed) in enumerate(zip(bundles, seeds)):
        attack_cfg = dataclasses.replace(cfg.attack, seed=seed)
        passage, trace = run_attack(enc, qb, attack_cfg, vocab, validation=validation, corpus=dataset)
        _write_passage(out / f"passage_{i:03d}.json", i, i, passage, vocab, trace.final_loss)
        write_trace_csv(out / f"trace_{i:03d}.csv", trace, include_retacc=cfg.attack.log_eval_every > 0)
        write_timing_csv(out / f"timing_{i:03d}.csv", trace)
        if figures:
            from .figures import render_trace

            render_trace(trace.records, out / "figures" / f"trace_{i:03d}.png", title=f"{cfg.attack.strategy} passage {i}")

    _write_manifest(out, cfg, "attack", {"clusters": cfg.clusters})
    return out


def _evaluate(cfg: RunConfig, enc: EncoderHandle, vocab: Vocabulary, dataset: Dataset, passages) -> EvalReport:
    corpus_ids, corpus_vectors = _corpus_vector_map(cfg, enc, vocab, dataset)
    index = build_index(corpus_ids, corpus_vectors, passages, enc)

    asr_split = _resolve_split(dataset, cfg.eval.asr_split, "eval.asr_split")
    test_qids = dataset.query_ids(asr_split)
    if cfg.eval.query_embeddings:
        cache = read_embedding_cache(cfg.eval.query_embeddings)
        row_of = {qid: i for i, qid in enumerate(cache.ids)}
        missing = [q for q in test_qids if q not in row_of]
        if missing:
            raise ConfigError(f"eval.query_embeddings: missing query id {missing[0]!r}")
        queries = np.asarray(cache.vectors, dtype=np.float64)[[row_of[q] for q in test_qids]]
    else:
        if enc.kind == "remote":
            raise ConfigError("eval.query_embeddings: required for remote encoders")
        queries = _query_vectors(enc, vocab, dataset, test_qids)

    asr, per_query = attack_success_rate(index, queries, cfg.eval.k_r, query_ids=test_qids)

    validation = _validation_set(cfg, enc, vocab, dataset)
    retacc = None
    n_val = 0
    if validation is not None:
        adv = (
            np.stack([encode_passage(enc, p) for p in passages]) if passages else np.zeros((0, validation.query_vectors.shape[1]))
        )
        retacc = validation.retacc(adv)
        n_val = validation.size
    return EvalReport(asr=asr, retacc=retacc, n_q=len(test_qids), n_val=n_val, per_query=per_query)


def cmd_evaluate(cfg: RunConfig, passages_path: str, out_dir: str | None = None, force: bool = False, figures: bool = True) -> Path:
    """Inject passages into the corpus index and report ASR and RetAcc."""
    vocab = _load_vocab(cfg)
    dataset = _load_data(cfg)
    enc = build_encoder(cfg, vocab)
    passages = load_passages(passages_path)
    out = _prepare_out_dir(out_dir or Path(cfg.output_dir) / "eval", force)
    report = _evaluate(cfg, enc, vocab, dataset, passages)
    (out / "report.json").write_text(json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8")
    if figures:
        from .figures import render_asr

        render_asr(report.to_json()["asr"], out / "figures" / "asr.png")
    _write_manifest(out, cfg, "evaluate", {"passages": str(passages_path)})
    return out


def cmd_analyze_candidates(cfg: RunConfig, trials: int, force: bool = False, figures: bool = True) -> Path:
    """Run the candidate-set-quality experiment and write its report."""
    if trials < 1:
        raise ConfigError("trials: must be >= 1")
    vocab = _load_vocab(cfg)
    dataset = _load_data(cfg)
    enc = build_encoder(cfg, vocab)
    if enc.kind == "remote":
        raise ConfigError("encoder.kind: candidate analysis needs a built-in encoder")

    train_split = _resolve_split(dataset, "train", "analyze train queries")
    qb = encode_queries(enc, [tokenize(dataset.queries[q], vocab) for q in dataset.query_ids(train_split)])
    validation = _validation_set(cfg, enc, vocab, dataset)
    if validation is None:
        raise ConfigError("eval.val_split: candidate analysis requires validation pairs")

    report = candidate_quality_experiment(
        enc, qb, validation, trials=trials, n=cfg.attack.n, m=cfg.attack.m, seed=cfg.attack.seed
    )
    out = _prepare_out_dir(Path(cfg.output_dir) / "analysis", force)
    (out / "quality.json").write_text(json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8")
    with (out / "quality.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["trial", "strategy", "mean_success", "contains_best"])
        for row in report.per_trial:
            for strategy in ("aggd", "hotflip", "random"):
                cell = row[strategy]
                writer.writerow([row["trial"], strategy, _fmt(cell["mean_success"]), int(cell["contains_best"])])
    if figures:
        from .figures import render_quality

        render_quality(report, out / "figures" / "quality.png")
    _write_manifest(out, cfg, "analyze-candidates", {"trials": trials})
    return out


def _sweep_point(payload: dict) -> dict:
    """One sweep point: full attack plus evaluation. Runs in-process or in a worker."""
    cfg = RunConfig.from_dict(payload["raw"], base=Path(payload["base"]))
    vocab = _load_vocab(cfg)
    dataset = _load_data(cfg)
    enc = build_encoder(cfg, vocab)
    out = _prepare_out_dir(cfg.output_dir, force=payload["force"])

    train_split = _resolve_split(dataset, "train", "sweep train queries")
    qids = dataset.query_ids(train_split)
    qb = encode_queries(enc, [tokenize(dataset.queries[q], vocab) for q in qids])
    validation = _validation_set(cfg, enc, vocab, dataset)
    if validation is None:
        raise ConfigError("eval.val_split: sweeps require validation pairs for the success series")

    passage, trace = run_attack(enc, qb, cfg.attack, vocab, validation=validation, corpus=dataset)
    _write_passage(out / "passage_000.json", 0, 0, passage, vocab, trace.final_loss)
    write_trace_csv(out / "trace_000.csv", trace, include_retacc=True)
    write_timing_csv(out / "timing_000.csv", trace)
    report = _evaluate(cfg, enc, vocab, dataset, [passage])
    series = [(r.iteration, 1.0 - r.retacc) for r in trace.records if r.retacc is not None]
    return {
        "value": payload["value"],
        "final_loss": trace.final_loss,
        "asr": {str(k): v for k, v in report.asr.items()},
        "series": series,
    }


def cmd_sweep(
    cfg: RunConfig,
    axis: str,
    values: list[int],
    parallel: int = 0,
    force: bool = False,
    figures: bool = True,
) -> Path:
    """One full attack+evaluate per axis value; results in sweep.csv plus series files."""
    if axis not in ("n", "m"):
        raise ConfigError("axis: must be 'n' or 'm'")
    if not values:
        raise ConfigError("values: at least one axis value is required")
    out = _prepare_out_dir(cfg.output_dir, force)

    log_every = cfg.attack.log_eval_every or max(1, cfg.attack.iterations // 100)
    seeds = [cfg.attack.seed] * len(values) if parallel <= 0 else _derived_seeds(cfg.attack.seed, len(values))
    payloads = []
    for value, seed in zip(values, seeds):
        point_dir = out / "points" / f"{axis}={value}"
        raw = apply_overrides(
            cfg.raw,
            [
                f"attack.{axis}={value}",
                f"attack.seed={seed}",
                f"attack.log_eval_every={log_every}",
                f"output_dir={json.dumps(str(point_dir))}",
            ],
        )
        payloads.append({"raw": raw, "base": cfg.base, "value": value, "force": force})

    if parallel > 0:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            rows = list(pool.map(_sweep_point, payloads))
    else:
        rows = [_sweep_point(p) for p in payloads]

    k_values = sorted(cfg.eval.k_r)
    series_for_figure = []
    with (out / "sweep.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([axis, "final_loss"] + [f"asr_{k}" for k in k_values] + ["series_path"])
        for row in rows:
            series_path = out / f"series_{axis}_{row['value']}.csv"
            with series_path.open("w", encoding="utf-8", newline="") as sfh:
                swriter = csv.writer(sfh, lineterminator="\n")
                swriter.writerow(["iter", "success"])
                for iteration, success in row["series"]:
                    swriter.writerow([iteration, _fmt(success)])
            writer.writerow(
                [row["value"], _fmt(row["final_loss"])]
                + [_fmt(row["asr"][str(k)]) for k in k_values]
                + [str(series_path)]
            )
            series_for_figure.append(
                (str(row["value"]), [i for i, _ in row["series"]], [s for _, s in row["series"]])
            )
    if figures:
        from .figures import render_sweep

        render_sweep(series_for_figure, out / "figures" / "sweep.png", axis_label=axis)
    _write_manifest(out, cfg, "sweep", {"axis": axis, "values": list(values), "parallel": parallel})
    return out


def cmd_oracle(cfg: RunConfig, mode: str, passage_ids: str | None) -> dict:
    """Hidden debugging command: brute-force optimum or best single swap."""
    vocab = _load_vocab(cfg)
    dataset = _load_data(cfg)
    enc = build_encoder(cfg, vocab)
    train_split = _resolve_split(dataset, "train", "oracle train queries")
    qb = encode_queries(enc, [tokenize(dataset.queries[q], vocab) for q in dataset.query_ids(train_split)])
    if mode == "optimum":
        seq, value = brute_force_optimum(enc, qb, cfg.attack.m, vocab)
        return {"mode": mode, "token_ids": list(seq.ids), "loss": value, "text": detokenize(seq, vocab)}
    if passage_ids is None:
        raise ConfigError("--passage: required for best-swap mode")
    seq = TokenSequence(int(t) for t in passage_ids.split(","))
    cand, value = brute_force_best_swap(enc, qb, seq)
    return {
        "mode": mode,
        "position": None if cand is None else cand.position,
        "token": None if cand is None else cand.token,
        "loss": value,
    }


# -- argument parsing ----------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="TOML or JSON run config")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="PATH=VALUE",
                        help="override a config field (repeatable); overrides win over the file")
    parser.add_argument("--force", action="store_true", help="allow writing into a non-empty output directory")
    parser.add_argument("--no-figures", action="store_true", help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aggd", description="Corpus-poisoning attack laboratory for dense retrievers")
    parser.add_argument("--version", action="version", version=f"aggd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="{attack,evaluate,analyze-candidates,sweep}")

    p = sub.add_parser("attack", help="train adversarial passages")
    _add_common(p)

    p = sub.add_parser("evaluate", help="compute ASR and RetAcc for existing passages")
    _add_common(p)
    p.add_argument("--passages", required=True,
                   help="run directory or passage JSON file ('none' evaluates the clean corpus)")
    p.add_argument("--out", default=None, help="report directory (default: <output_dir>/eval)")

    p = sub.add_parser("analyze-candidates", help="candidate-set quality experiment")
    _add_common(p)
    p.add_argument("--trials", type=int, default=100)

    p = sub.add_parser("sweep", help="attack+evaluate over a parameter grid")
    _add_common(p)
    p.add_argument("--axis", required=True, choices=["n", "m"])
    p.add_argument("--values", required=True, help="comma-separated integers, e.g. 30,60,90,150")
    p.add_argument("--parallel", type=int, default=0, metavar="W",
                   help="run points in W processes with derived seeds (default: sequential, shared seed)")

    # Debugging helper, deliberately absent from the subcommand listing.
    p = sub.add_parser("oracle")
    _add_common(p)
    p.add_argument("--mode", required=True, choices=["optimum", "best-swap"])
    p.add_argument("--passage", default=None, help="comma-separated token ids (best-swap mode)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_run_config(args.config, overrides=args.overrides)
        if args.command == "attack":
            out = cmd_attack(cfg, force=args.force, figures=not args.no_figures)
            print(f"attack artifacts written to {out}")
        elif args.command == "evaluate":
            out = cmd_evaluate(cfg, args.passages, out_dir=args.out, force=args.force, figures=not args.no_figures)
            print(f"evaluation report written to {out}")
        elif args.command == "analyze-candidates":
            out = cmd_analyze_candidates(cfg, trials=args.trials, force=args.force, figures=not args.no_figures)
            print(f"candidate analysis written to {out}")
        elif args.command == "sweep":
            values = [int(v) for v in args.values.split(",") if v.strip()]
            out = cmd_sweep(cfg, axis=args.axis, values=values, parallel=args.parallel,
                            force=args.force, figures=not args.no_figures)
            print(f"sweep results written to {out}")
        elif args.command == "oracle":
            print(json.dumps(cmd_oracle(cfg, args.mode, args.passage), indent=2))
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataFormatError, BridgeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
