"""Acceptance suite: one test per criterion, one printed pass line each.

Full-scale attack numbers need pretrained retrievers and million-passage
corpora, so acceptance is property-based plus small-scale oracle
reproductions. Statistical criteria use fixtures and seeds pinned here.
Run with `pytest tests/test_acceptance.py -v -s` to see the pass lines.
"""

import time

import numpy as np

from aggd.attack import (
    AttackConfig,
    best_candidate,
    build_aggd_candidates,
    run_attack,
    score_tokens,
)
from aggd.cli import main as cli_main
from aggd.clustering import kmeans
from aggd.data import TokenSequence, Vocabulary
from aggd.encoder import (
    EmbeddingTable,
    QueryBundle,
    encode_passage,
    encode_queries,
    loss_gradient,
    mean_pool_encoder,
    seeded_tanh_encoder,
    tanh_encoder,
)
from aggd.oracle import brute_force_best_swap, brute_force_optimum
from aggd.retrieval import (
    ValidationSet,
    attack_success_rate,
    build_index,
    candidate_quality_experiment,
    retrieval_accuracy,
    topk,
)
from helpers import TOY_TABLE, write_eval_fixture
from test_encoder import finite_difference_gradient


def _report(name: str, detail: str = "") -> None:
    print(f"[PASS] {name}" + (f": {detail}" if detail else ""), flush=True)


def _vocab(size: int) -> Vocabulary:
    return Vocabulary(tokens=tuple(f"t{i}" for i in range(size)), unk_id=0)


def test_oracle_convergence_mean_pool():
    """AGGD reaches the brute-force optimum within m accepted updates, 50/50 instances."""
    started = time.perf_counter()
    rng = np.random.default_rng(2_025_08_09)
    for _ in range(50):
        m = int(rng.integers(2, 5))
        vocab_size = int(rng.integers(8, 18 if m == 4 else 65))
        dim = int(rng.integers(2, 9))
        table = EmbeddingTable(rng.uniform(-1, 1, size=(vocab_size, dim)))
        enc = mean_pool_encoder(table)
        qb = QueryBundle.from_vectors(rng.uniform(-1, 1, size=(3, dim)))
        vocab = _vocab(vocab_size)
        cfg = AttackConfig(m=m, n=m, iterations=m + vocab_size + 5, strategy="aggd",
                           seed=int(rng.integers(2**31)))
        passage, trace = run_attack(enc, qb, cfg, vocab)
        _, best_loss = brute_force_optimum(enc, qb, m, vocab)
        assert abs(trace.final_loss - best_loss) <= 1e-9
        assert sum(r.accepted for r in trace.records) <= m
    elapsed = time.perf_counter() - started
    assert elapsed < 5.0
    _report("oracle convergence (mean-pool)", f"50 instances in {elapsed:.2f}s")


def test_exact_first_order_equivalence():
    """The depth-0 AGGD swap equals the brute-force best swap exactly, 200/200 states."""
    started = time.perf_counter()
    rng = np.random.default_rng(41)
    for _ in range(200):
        vocab_size = int(rng.integers(8, 65))
        dim = int(rng.integers(2, 9))
        m = int(rng.integers(2, 7))
        enc = mean_pool_encoder(EmbeddingTable(rng.uniform(-1, 1, size=(vocab_size, dim))))
        qb = QueryBundle.from_vectors(rng.uniform(-1, 1, size=(3, dim)))
        passage = TokenSequence(rng.integers(0, vocab_size, size=m))
        scores = score_tokens(enc, passage, qb)
        swap, swap_loss = best_candidate(enc, passage, qb, build_aggd_candidates(scores, k=1, depth=0))
        oracle_swap, oracle_loss = brute_force_best_swap(enc, qb, passage)
        assert swap == oracle_swap
        assert swap_loss == oracle_loss
    elapsed = time.perf_counter() - started
    assert elapsed < 5.0
    _report("exact first-order equivalence", f"200 states in {elapsed:.2f}s")


def test_monotonicity_all_strategies():
    """Accepted losses strictly decrease and trace losses never increase (tanh encoder)."""
    violations = 0
    rng = np.random.default_rng(303)
    table = EmbeddingTable(rng.uniform(-1, 1, size=(32, 6)))
    enc = seeded_tanh_encoder(table, 5, seed=77)
    qb = QueryBundle.from_vectors(rng.uniform(-1, 1, size=(4, 5)))
    vocab = _vocab(32)
    for strategy in ("aggd", "hotflip", "random"):
        for seed in range(10):
            cfg = AttackConfig(m=6, n=12, iterations=500, strategy=strategy, seed=seed)
            _, trace = run_attack(enc, qb, cfg, vocab)
            losses = [r.loss for r in trace.records]
            violations += sum(b > a for a, b in zip(losses, losses[1:]))
            accepted = trace.accepted_losses()
            violations += sum(b >= a for a, b in zip(accepted, accepted[1:]))
    assert violations == 0
    _report("monotonicity", "3 strategies x 10 seeds x 500 iterations, zero violations")


def test_tier_mechanics():
    """An already-optimal passage walks depths 0,1,2,... over disjoint covering windows."""
    vocab_size, m, n = 13, 3, 6  # k = 2, so 7 windows cover [0, 13)
    k = n // m
    rng = np.random.default_rng(5)
    table = EmbeddingTable(rng.uniform(-1, 1, size=(vocab_size, 4)))
    enc = mean_pool_encoder(table)
    qb = QueryBundle.from_vectors(rng.uniform(-1, 1, size=(2, 4)))
    best_token = int(np.argmax(table.vectors @ qb.mean_vector))
    cfg = AttackConfig(m=m, n=n, iterations=50, strategy="aggd", init="fixed-token",
                       init_token=best_token, seed=0)
    _, trace = run_attack(enc, qb, cfg, _vocab(vocab_size))
    depths = [r.depth for r in trace.records]
    assert depths == list(range(7))
    assert all(not r.accepted for r in trace.records)
    windows = [(d * k, min((d + 1) * k, vocab_size)) for d in depths]
    covered = sorted(rank for lo, hi in windows for rank in range(lo, hi))
    assert covered == list(range(vocab_size))  # disjoint and covering
    assert trace.exhausted
    _report("tier mechanics", f"depths {depths}, windows cover [0,{vocab_size}), exhausted")


def test_gradient_checks():
    """Analytic gradients match central finite differences on 100 instances per encoder."""
    rng = np.random.default_rng(606)
    worst = 0.0
    for kind in ("mean-pool", "tanh-projection"):
        for _ in range(100):
            vocab_size = 12
            dim = int(rng.integers(2, 7))
            table = rng.uniform(-1, 1, size=(vocab_size, dim))
            if kind == "mean-pool":
                make = lambda t: mean_pool_encoder(EmbeddingTable(t))  # noqa: E731
                qdim = dim
            else:
                dim_out = int(rng.integers(2, 6))
                seed = int(rng.integers(2**31))
                make = lambda t: seeded_tanh_encoder(EmbeddingTable(t), dim_out, seed)  # noqa: E731
                qdim = dim_out
            qb = QueryBundle.from_vectors(rng.uniform(-1, 1, size=(3, qdim)))
            seq = TokenSequence(rng.choice(vocab_size, size=4, replace=False))
            _, analytic = loss_gradient(make(table), seq, qb)
            numeric = finite_difference_gradient(make, table, seq, qb, step=1e-5)
            worst = max(worst, float(np.max(np.abs(analytic - numeric))))
    assert worst < 1e-6
    _report("gradient checks", f"max abs error {worst:.2e} over 200 instances")


def test_candidate_quality_direction():
    """AGGD's candidate sets contain the best swap far more often than HotFlip's."""
    started = time.perf_counter()
    seed = 20250809
    rng = np.random.default_rng(seed)
    table = EmbeddingTable(rng.uniform(-1, 1, size=(64, 8)))
    enc = seeded_tanh_encoder(table, 8, seed=seed + 1)
    center = rng.uniform(-1, 1, size=8)
    qb = QueryBundle.from_vectors(center + 0.4 * rng.uniform(-1, 1, size=(16, 8)))
    val_queries = center + 0.4 * rng.uniform(-1, 1, size=(48, 8))
    gold = 0.35 * val_queries + 0.3 * rng.uniform(-1, 1, size=(48, 8))
    validation = ValidationSet(val_queries, gold)

    report = candidate_quality_experiment(enc, qb, validation, trials=200, n=32, m=8, seed=seed)
    aggd = report.containment_fraction("aggd")
    hotflip = report.containment_fraction("hotflip")
    assert aggd - hotflip >= 0.10
    assert report.mean_success["hotflip"] >= report.mean_success["random"]
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0
    _report(
        "candidate quality direction",
        f"containment aggd={aggd:.2f} hotflip={hotflip:.2f}, "
        f"mean success hotflip={report.mean_success['hotflip']:.3f} >= "
        f"random={report.mean_success['random']:.3f} ({elapsed:.1f}s)",
    )


def _ordering_world(seed: int):
    """Synthetic 2,000-passage retrieval world with a planted strong-token pool."""
    vocab_size, dim = 65536, 16
    rng = np.random.default_rng(seed)
    table = rng.uniform(-1, 1, size=(vocab_size, dim))
    strong = rng.choice(vocab_size, size=32, replace=False)
    center = rng.uniform(-1, 1, size=dim)
    center /= np.linalg.norm(center)
    # Strong tokens share a direction and strictly dominate the uniform
    # tail in magnitude, like high-salience query terms.
    for tok in strong:
        direction = 0.8 * center + 0.2 * rng.uniform(-1, 1, size=dim)
        table[tok] = rng.uniform(6.0, 10.0) * direction / np.linalg.norm(direction)
    enc = tanh_encoder(
        EmbeddingTable(table),
        0.15 * np.random.default_rng(seed + 1).uniform(-1, 1, size=(dim, dim)),
        np.random.default_rng(seed + 2).uniform(-1, 1, size=dim),
    )

    def make_pair():
        terms = rng.choice(strong, size=5, replace=False)
        n_extra = int(rng.integers(2, 6))
        extra = rng.choice(strong, size=n_extra, replace=False)
        query = TokenSequence(list(terms) + list(rng.integers(0, vocab_size, size=3)))
        gold_ids = list(terms) + list(extra) + list(rng.integers(0, vocab_size, size=5 - n_extra))
        rng.shuffle(gold_ids)
        return query, TokenSequence(gold_ids)

    train_queries = [make_pair()[0] for _ in range(48)]
    pairs = [make_pair() for _ in range(256)]
    # 2,000-passage corpus; the gold passages are corpus members.
    corpus = [TokenSequence(rng.integers(0, vocab_size, size=10)) for _ in range(2000)]
    for slot, (_, gold_passage) in zip(rng.choice(2000, size=256, replace=False), pairs):
        corpus[slot] = gold_passage

    qb = encode_queries(enc, train_queries)
    validation = ValidationSet(
        np.stack([encode_passage(enc, q) for q, _ in pairs]),
        np.stack([encode_passage(enc, g) for _, g in pairs]),
    )
    return enc, _vocab(vocab_size), qb, validation, corpus


def test_attack_ordering_desk_scale():
    """Mean final success rate orders AGGD >= HotFlip >= random with a clear random gap."""
    started = time.perf_counter()
    finals = {s: [] for s in ("aggd", "hotflip", "random")}
    for seed in range(1000, 1005):
        enc, vocab, qb, validation, corpus = _ordering_world(seed)
        assert len(corpus) == 2000
        for strategy in finals:
            cfg = AttackConfig(m=10, n=50, iterations=300, strategy=strategy, seed=seed)
            passage, _ = run_attack(enc, qb, cfg, vocab)
            finals[strategy].append(retrieval_accuracy(validation, encode_passage(enc, passage)).success_rate)
    means = {s: float(np.mean(v)) for s, v in finals.items()}
    assert means["aggd"] >= means["hotflip"] >= means["random"]
    assert means["aggd"] - means["random"] >= 0.05
    elapsed = time.perf_counter() - started
    assert elapsed < 300.0
    _report(
        "attack ordering at desk scale",
        f"mean success aggd={means['aggd']:.3f} >= hotflip={means['hotflip']:.3f} "
        f">= random={means['random']:.3f} ({elapsed:.0f}s)",
    )


def test_metric_correctness():
    """The worked ASR/RetAcc example reproduces exactly; topk matches its sort oracle."""
    enc = mean_pool_encoder(EmbeddingTable(np.array([[2.0, 0.0], [0.0, 2.0], [1.9, 0.0]])))
    index = build_index(["p1", "p2"], np.array([[2.0, 0.0], [0.0, 2.0]]), [TokenSequence([2])], enc)
    asr, _ = attack_success_rate(index, np.array([[1.0, 0.0], [0.0, 1.0]]), [1, 2])
    assert asr == {1: 0.0, 2: 0.5}
    validation = ValidationSet(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([[2.0, 0.0], [0.0, 2.0]]))
    assert retrieval_accuracy(validation, np.array([[1.9, 0.0]])).retacc == 1.0

    rng = np.random.default_rng(9090)
    for _ in range(1000):
        rows = int(rng.integers(1, 25))
        dim = int(rng.integers(1, 5))
        k = int(rng.integers(1, 12))
        ids = [f"p{i}" for i in range(rows)]
        idx = build_index(ids, rng.integers(-3, 4, size=(rows, dim)).astype(np.float64))
        query = rng.integers(-3, 4, size=dim).astype(np.float64)
        scores = idx.vectors @ query
        oracle = sorted(range(rows), key=lambda r: (-scores[r], False, ids[r]))[:k]
        assert [pid for pid, _ in topk(idx, query, k)] == [ids[r] for r in oracle]
    _report("metric correctness", "hand example exact; topk = sort oracle on 1000 instances")


def test_kmeans_properties():
    """Inertia never increases across Lloyd iterations; the toy example recovers clusters."""
    rng = np.random.default_rng(11)
    for _ in range(100):
        points = rng.normal(size=(int(rng.integers(6, 40)), int(rng.integers(2, 5))))
        result = kmeans(points, k=int(rng.integers(1, 6)), seed=int(rng.integers(10_000)))
        history = result.inertia_history
        assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))
    points = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 11.0]])
    result = kmeans(points, k=2, seed=3)
    assert result.assignment[0] == result.assignment[1]
    assert result.assignment[2] == result.assignment[3]
    assert result.assignment[0] != result.assignment[2]
    assert np.allclose(sorted(result.centroids.tolist()), [[0.0, 0.5], [10.0, 10.5]])
    _report("k-means", "inertia monotone on 100 instances; symmetric toy exact")


def test_reproducibility(tmp_path):
    """Identical config and seed produce byte-identical trace CSVs."""
    fixture = write_eval_fixture(tmp_path / "fx")
    outputs = []
    for name in ("first", "second"):
        code = cli_main([
            "attack", "--config", str(fixture["config"]),
            "--set", "attack.m=2", "--set", "attack.n=2",
            "--set", "attack.iterations=6", "--set", "attack.seed=5",
            "--set", f'output_dir="{tmp_path / name}"',
            "--no-figures",
        ])
        assert code == 0
        outputs.append((tmp_path / name / "trace_000.csv").read_bytes())
    assert outputs[0] == outputs[1]
    _report("reproducibility", f"trace CSV byte-identical ({len(outputs[0])} bytes)")
