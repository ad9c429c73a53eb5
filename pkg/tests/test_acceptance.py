"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with  pytest tests/test_acceptance.py -v -s  to see per-criterion
lines. Shared artifacts (graph, datasets) build once per session.
"""

import json
import math
import os
import time

import numpy as np
import pytest

from causaltext.cli import main as cli_main
from causaltext.common import rng_stream
from causaltext.corpus import PairCounts, PairSpec, aggregate, scan
from causaltext.dataset import (
    DatasetConfig,
    build_dataset,
    mention_order_counts,
    preset_config,
    temporal_pair_counts,
)
from causaltext.evaluate import (
    NO_RELATION,
    X_CAUSES_Y,
    build_test_sets,
    covered_pairs,
    frequency_report,
    position_report,
    post_hoc_report,
    run_task,
    seen_unseen_report,
)
from causaltext.graphs import gen_causal_graph, gen_relation_graph
from causaltext.oracles import (
    ExplicitMemorizerOracle,
    GroundTruthOracle,
    PositionOracle,
    PostHocOracle,
    TemporalPrecedenceOracle,
    UniformOracle,
)
from causaltext.scenarios import GraphIndex, check_scenario, sample_event_chains, sample_scenario
from causaltext.templates import load_inventory

ACCEPT_SEED = 42
SWEEP_SEED = 11


def ok(message: str) -> None:
    print(f"PASS — {message}")


@pytest.fixture(scope="module")
def graph():
    rng = np.random.default_rng(ACCEPT_SEED)
    gc = gen_causal_graph(100, rng, seed=ACCEPT_SEED)
    gn = gen_relation_graph(gc, rng)
    return gc, gn


@pytest.fixture(scope="module")
def sets(graph):
    return build_test_sets(graph[0])


@pytest.fixture(scope="module")
def inventory():
    return load_inventory()


@pytest.fixture(scope="module")
def temporal_xy_dataset(graph):
    gc, gn = graph
    cfg = preset_config("temporal_xy", seed=SWEEP_SEED, num_scenarios=1000, train_size=900)
    return build_dataset(gc, gn, cfg)


def _closure(gc):
    adj = np.zeros((gc.n, gc.n), dtype=bool)
    for u, v in gc.edges:
        adj[u - 1, v - 1] = True
    closure = adj.copy()
    while True:
        nxt = closure | (closure @ adj)
        if (nxt == closure).all():
            return closure
        closure = nxt


def test_graph_invariant_suite_200_seeds():
    """200 seeds at n=100: acyclicity, root degrees, no descendant of all
    roots, type-order linear extension, same-type independence; < 60 s."""
    t0 = time.perf_counter()
    for seed in range(200):
        rng = np.random.default_rng(seed)
        gc = gen_causal_graph(100, rng, seed=seed)
        gn = gen_relation_graph(gc, rng)
        closure = _closure(gc)
        assert not closure.diagonal().any(), f"seed {seed}: cycle"
        roots = np.array(gc.roots) - 1
        for r in roots:
            assert not (closure[:, r]).any(), f"seed {seed}: root with a cause"
            assert closure[r].any(), f"seed {seed}: childless root"
        assert not closure[roots, :].all(axis=0).any(), f"seed {seed}: descendant of all roots"
        tpos = np.array([gn.type_index(v) for v in gc.vertices()])
        bad_order = closure & (tpos[:, None] >= tpos[None, :])
        assert not bad_order.any(), f"seed {seed}: type order not a linear extension"
        tid = np.array([gn.type_of[v] for v in gc.vertices()])
        same_type = tid[:, None] == tid[None, :]
        assert not (same_type & (closure | closure.T)).any(), f"seed {seed}: same-type related"
    dt = time.perf_counter() - t0
    assert dt < 60.0, f"graph suite took {dt:.1f}s"
    ok(f"graph invariant suite: 200 seeds, 0 violations in {dt:.1f}s (< 60s)")


def test_scenario_consistency_sweep_10k(graph):
    """10,000 scenarios checked against the closure oracle: 0 violations."""
    gc, gn = graph
    index = GraphIndex(gc, gn)
    violations = 0
    for i in range(10_000):
        rng = rng_stream(777, i)
        chains = sample_event_chains(gc, rng, index=index)
        sc = sample_scenario(gc, gn, chains, rng, index=index, seed_offset=i)
        if check_scenario(gc, gn, sc, index):
            violations += 1
    assert violations == 0
    ok("scenario consistency sweep: 10,000 scenarios, 0 violations")


def test_determinism_across_worker_counts(tmp_path):
    """gen-graph + gen-data, fixed seeds, 1 vs 8 workers: byte-identical."""
    g1, g2 = tmp_path / "g1.json", tmp_path / "g2.json"
    assert cli_main(["gen-graph", "--n", "100", "--seed", "5", "--out", str(g1)]) == 0
    assert cli_main(["gen-graph", "--n", "100", "--seed", "5", "--out", str(g2)]) == 0
    assert g1.read_bytes() == g2.read_bytes()
    for workers, name in ((1, "w1"), (8, "w8")):
        rc = cli_main(
            [
                "gen-data", "--graph", str(g1), "--preset", "all", "--seed", "9",
                "--num-scenarios", "200", "--train-size", "180",
                "--out-dir", str(tmp_path / name), "--workers", str(workers),
            ]
        )
        assert rc == 0
    files = ["train.jsonl", "val.jsonl", "train.txt", "val.txt", "manifest.json"]
    for f in files:
        b1 = (tmp_path / "w1" / f).read_bytes()
        b8 = (tmp_path / "w8" / f).read_bytes()
        assert b1 == b8, f"{f} differs between 1 and 8 workers"
    ok("determinism: 1 vs 8 workers byte-identical (graph + dataset files)")


def test_position_heuristic_detection(graph, sets, inventory, temporal_xy_dataset):
    """Position oracle on cause-first temporal training data: matched-order
    accuracy >= 0.99, mismatched <= 0.01; unrelated-relation probe shows
    the same pattern."""
    counts = mention_order_counts(temporal_xy_dataset.manifest)
    cov = covered_pairs(counts, sets.causal)
    assert len(cov) >= 50, "too few covered pairs to evaluate"
    oracle = PositionOracle(counts)
    rep = position_report(oracle, sets, inventory, trained_majority="xy", pairs=cov)
    assert rep.matched >= 0.99, rep.matched
    assert rep.mismatched <= 0.01, rep.mismatched
    probe = position_report(
        oracle, sets, inventory, trained_majority="xy", pairs=cov, probe=True
    )
    assert probe.matched >= 0.99 and probe.mismatched <= 0.01
    ok(
        "position-heuristic detection: matched %.3f >= 0.99, mismatched %.3f <= 0.01; probe %.3f/%.3f"
        % (rep.matched, rep.mismatched, probe.matched, probe.mismatched)
    )


def test_randomization_sweep_gap_shrinks(graph, sets, inventory):
    """Matched-minus-mismatched gap is monotone non-increasing over
    p in {0, 0.1, 0.2, 0.3, 0.4} and strictly smaller at 0.4 than at 0."""
    gc, gn = graph
    gaps = []
    for p in (0.0, 0.1, 0.2, 0.3, 0.4):
        cfg = DatasetConfig(
            seed=SWEEP_SEED, num_scenarios=1000, train_size=900,
            kinds=("temporal",), policies={"temporal": {"mixed": p}},
        )
        ds = build_dataset(gc, gn, cfg)
        counts = mention_order_counts(ds.manifest)
        cov = covered_pairs(counts, sets.causal)
        rep = position_report(
            PositionOracle(counts), sets, inventory, trained_majority="xy", pairs=cov
        )
        gaps.append(rep.matched - rep.mismatched)
    assert gaps[-1] < gaps[0], gaps
    for a, b in zip(gaps, gaps[1:]):
        assert b <= a + 0.02, gaps
    ok("randomization sweep: gaps " + ", ".join(f"{g:.3f}" for g in gaps) + " (monotone, shrinking)")


def test_post_hoc_detection(graph, sets, inventory, temporal_xy_dataset):
    """Post-hoc oracle turns temporal facts into causal claims (error rate
    >= 0.99 on covered edges); the temporal-precedence oracle deduces
    Y-not-cause-X >= 0.99 with post-hoc error at tie-break chance."""
    facts = set(temporal_pair_counts(temporal_xy_dataset.manifest))
    covered = [p for p in sets.causal if p in facts]
    assert len(covered) >= 50
    post_hoc = PostHocOracle(facts)
    rep = post_hoc_report(post_hoc, sets, inventory, pairs=covered)
    assert rep.error_rate >= 0.99, rep.error_rate

    precedence = TemporalPrecedenceOracle(facts)
    notcause = run_task(precedence, "infer_notcause", sets, inventory, over="causal", pairs=covered)
    assert notcause.accuracy >= 0.99, notcause.accuracy
    chance = post_hoc_report(precedence, sets, inventory, pairs=covered, tie="split")
    assert abs(chance.error_rate - 0.5) < 1e-9, chance.error_rate
    ok(
        "post-hoc detection: error %.3f >= 0.99; precedence notcause %.3f, post-hoc at tie chance %.3f"
        % (rep.error_rate, notcause.accuracy, chance.error_rate)
    )


def test_reference_bounds(graph, sets, inventory):
    """Ground truth scores 1.000 on all tasks; the uniform oracle lands at
    chance (33.3 +/- 3 three-way, 50 +/- 3 two-way) over >= 500 pairs with
    randomized tie order."""
    gc, _ = graph
    gt = GroundTruthOracle(gc)
    for task, over in (
        ("infer_causal", None),
        ("infer_nocausal", None),
        ("infer_notcause", "causal"),
        ("alt_two_way", None),
    ):
        rep = run_task(gt, task, sets, inventory, over=over)
        assert rep.accuracy == 1.0, (task, rep.accuracy)

    uni = UniformOracle()
    assert len(sets.unrelated) >= 500
    rng = np.random.default_rng(303)
    three = run_task(uni, "infer_nocausal", sets, inventory, tie="random", tie_rng=rng)
    assert abs(three.accuracy - 1 / 3) <= 0.03, three.accuracy
    two = run_task(
        uni, "infer_notcause", sets, inventory, over="unrelated", tie="random", tie_rng=rng
    )
    assert abs(two.accuracy - 0.5) <= 0.03, two.accuracy
    ok(
        "reference bounds: ground truth 1.000 on all tasks; uniform %.3f (3-way), %.3f (2-way) over %d pairs"
        % (three.accuracy, two.accuracy, three.n)
    )


def test_seen_unseen_augmentation(graph, sets, inventory):
    """A scorer that memorizes explicit statements predicts the causal
    option on >= 99%% of seen edges and falls back to its prior on unseen
    edges; the report splits exactly along the manifest partition."""
    gc, gn = graph
    cfg = DatasetConfig(
        seed=13, num_scenarios=600, train_size=540,
        augmentation={"seen_fraction": 0.5},
    )
    ds = build_dataset(gc, gn, cfg)
    aug = ds.manifest["augmentation"]
    seen = [tuple(e) for e in aug["seen_edges"]]
    unseen = [tuple(e) for e in aug["unseen_edges"]]
    assert set(seen) | set(unseen) == set(gc.edges)
    assert not set(seen) & set(unseen)
    assert len(seen) == math.ceil(0.5 * len(gc.edges))

    scorer = ExplicitMemorizerOracle(seen, [tuple(p) for p in aug["explicit_not_causal_pairs"]])
    rep = seen_unseen_report(scorer, seen, unseen, inventory)
    assert rep.seen["n"] == len(seen) and rep.unseen["n"] == len(unseen)
    assert rep.seen["fractions"][X_CAUSES_Y] >= 0.99
    assert rep.unseen["fractions"][X_CAUSES_Y] <= 0.01
    assert rep.unseen["fractions"][NO_RELATION] >= 0.99
    ok(
        "seen/unseen augmentation: seen X->Y %.3f, unseen falls to prior (no-relation %.3f), exact manifest split"
        % (rep.seen["fractions"][X_CAUSES_Y], rep.unseen["fractions"][NO_RELATION])
    )


def test_frequency_buckets_non_decreasing(graph, sets, inventory, temporal_xy_dataset):
    """With a frequency-thresholded position oracle the per-bucket
    matched-minus-mismatched gap is non-decreasing in bucket index."""
    counts = mention_order_counts(temporal_xy_dataset.manifest)
    freqs = temporal_pair_counts(temporal_xy_dataset.manifest)
    positive = sorted(c for c in freqs.values() if c > 0)
    threshold = positive[len(positive) // 2]  # median positive frequency
    oracle = PositionOracle(counts, min_count=max(2, threshold))
    buckets = frequency_report(
        oracle, sets, inventory, freqs, trained_majority="xy", buckets=10
    )
    gaps = [b.gap for b in buckets]
    for a, b in zip(gaps, gaps[1:]):
        assert b >= a - 1e-9, gaps
    assert gaps[-1] > gaps[0], gaps
    ok("frequency buckets: gaps " + ", ".join(f"{g:.2f}" for g in gaps) + " (non-decreasing)")


# ---------------------------------------------------------------------------
# corpus analyzer criteria


_FILLER = (
    "quorum velvet jungle oxbow zephyr quartz nimbus prism fjord glyph "
    "plinth flux onyx vortex jigsaw whelm crypt dusk loam brume"
).split()


def _build_block(pairs, docs_per_block, rng):
    """One corpus block with per-pair planted counts known by construction."""
    expected = {p: PairCounts() for p in pairs}
    lines = []
    for i in range(docs_per_block):
        body = " ".join(rng.choice(_FILLER) for _ in range(rng.integers(350, 550)))
        if i % 4 != 3:
            pair = pairs[int(rng.integers(len(pairs)))]
            cause_first = bool(rng.random() < 0.7)
            a, b = (pair.cause, pair.effect) if cause_first else (pair.effect, pair.cause)
            insert = f"{a} then came {b}"
            cut = int(rng.integers(0, len(body)))
            cut = body.find(" ", cut)
            cut = len(body) if cut < 0 else cut
            body = body[:cut] + " " + insert + " " + body[cut:]
            if cause_first:
                expected[pair].x_first += 1
            else:
                expected[pair].y_first += 1
        lines.append(json.dumps({"text": body}))
    return "\n".join(lines) + "\n", expected


def test_corpus_window_edge_and_exact_counts(tmp_path, inventory):
    """Window rule: a 50-character gap counts, 51 does not; planted
    per-pair ratios recovered exactly."""
    pair = PairSpec("smoking", "lung cancer")
    f = tmp_path / "edge.jsonl"
    with open(f, "w") as fh:
        fh.write(json.dumps({"text": "smoking" + " " * 43 + "lung cancer"}) + "\n")
        fh.write(json.dumps({"text": "smoking" + " " * 44 + "lung cancer"}) + "\n")
        fh.write(json.dumps({"text": "lung cancer" + " " * 39 + "smoking"}) + "\n")
        fh.write(json.dumps({"text": "lung cancer" + " " * 40 + "smoking"}) + "\n")
        for _ in range(7):
            fh.write(json.dumps({"text": "smoking causes lung cancer"}) + "\n")
        for _ in range(3):
            fh.write(json.dumps({"text": "lung cancer from smoking"}) + "\n")
    res = scan(f, [pair], window=50)
    c = res.counts[pair]
    assert (c.x_first, c.y_first) == (8, 4), (c.x_first, c.y_first)
    report = aggregate(res, min_cooccurrence=1)
    assert report.pooled_x_first_fraction == 8 / 12
    ok("corpus window edge: gap 50 counts, 51 does not; planted counts exact")


def test_corpus_one_gigabyte_under_30s(tmp_path_factory):
    """A 1 GiB planted corpus scans in under 30 s with up to 8 workers,
    and every planted count is recovered exactly."""
    pairs = [
        PairSpec("smoking", "lung cancer"),
        PairSpec("stress", "headache"),
        PairSpec("deforestation", "climate change"),
        PairSpec("bacteria", "infections"),
        PairSpec("drunk driving", "accident"),
        PairSpec("education", "income"),
        PairSpec("noise", "hearing loss"),
        PairSpec("sugar", "tooth decay"),
    ]
    rng = np.random.default_rng(1234)
    block, expected = _build_block(pairs, docs_per_block=400, rng=rng)
    target = 1 << 30
    reps = -(-target // len(block.encode()))
    base = tmp_path_factory.mktemp("gigacorpus")
    path = base / "corpus.jsonl"
    data = block.encode()
    with open(path, "wb") as f:
        for _ in range(reps):
            f.write(data)
    size = os.path.getsize(path)
    assert size >= target

    workers = min(8, os.cpu_count() or 1)
    t0 = time.perf_counter()
    res = scan(path, pairs, window=50, workers=workers)
    dt = time.perf_counter() - t0
    try:
        for p in pairs:
            got = res.counts[p]
            assert got.x_first == expected[p].x_first * reps, p
            assert got.y_first == expected[p].y_first * reps, p
        assert dt < 30.0, f"scan took {dt:.1f}s"
    finally:
        path.unlink()
    ok(
        "corpus throughput: %.2f GiB in %.1fs (%.0f MB/s, %d workers), counts exact"
        % (size / (1 << 30), dt, size / 1e6 / dt, workers)
    )
