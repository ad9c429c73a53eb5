import math

import numpy as np
import pytest
from oracle_utils import matrix_closure, path_exists

from causaltext.common import DataError
from causaltext.evaluate import (
    NO_RELATION,
    THREE_WAY,
    X_CAUSES_Y,
    X_NOT_CAUSES_Y,
    Y_CAUSES_X,
    Y_NOT_CAUSES_X,
    TestSets,
    build_queries,
    build_test_sets,
    covered_pairs,
    mc_predict,
    relation_probability,
    render_markdown,
    run_task,
)
from causaltext.graphs import CausalGraph
from causaltext.oracles import GroundTruthOracle, UniformOracle
from causaltext.scoring import Scorer


class MappedScorer(Scorer):
    """Scores by relation option, with a hook for invariance transforms."""

    name = "mapped"

    def __init__(self, by_kind: dict, transform=None):
        self.by_kind = by_kind
        self.transform = transform or (lambda p: p)

    def score(self, q):
        if q.kind == "causal":
            base = self.by_kind.get(("causal", q.cause, q.effect), 0.2)
        elif q.kind == "not_causal":
            base = self.by_kind.get(("not_causal", q.cause, q.effect), 0.2)
        else:
            base = self.by_kind.get(("no_relation",), 0.2)
        return self.transform(base)


def test_chain_test_sets():
    gc = CausalGraph(n=3, roots=(1,), edges=((1, 2), (2, 3)))
    sets = build_test_sets(gc)
    assert sets.causal == ((1, 2), (2, 3))
    # (1, 3) is a descendant pair, not a direct edge: in neither set
    assert sets.unrelated == ()


def test_disjoint_roots_test_sets():
    gc = CausalGraph(n=4, roots=(1, 3), edges=((1, 2), (3, 4)))
    sets = build_test_sets(gc)
    assert set(sets.unrelated) >= {(1, 3), (1, 4), (2, 3), (2, 4)}


def test_test_sets_match_closure_oracle(gc, sets):
    closure = matrix_closure(gc.n, gc.edges)
    causal = set(sets.causal)
    unrelated = set(sets.unrelated)
    for x in gc.vertices():
        for y in gc.vertices():
            if x == y:
                continue
            edge = (x, y) in gc.edges
            related = path_exists(closure, x, y) or path_exists(closure, y, x)
            assert ((x, y) in causal) == edge
            if x < y:
                assert ((x, y) in unrelated) == (not related)
            # indirect descendants sit in neither set
            if not edge and related:
                assert (x, y) not in causal and tuple(sorted((x, y))) not in unrelated


def test_single_template_set_equals_its_score(inventory):
    q = build_queries(X_CAUSES_Y, (1, 2), inventory, position="random")
    assert len(q) == 6

    class OneHot(Scorer):
        def score(self, query):
            return 0.7 if query.template_id == "cau1" else 0.1

    # restrict to one template by scoring through a position filter with
    # a single-member inventory subset
    single = [t for t in inventory.by_kind["causal"] if t.id == "cau1"]
    import causaltext.templates as tpl

    inv_one = tpl.TemplateInventory(single, {}, "x", "one")
    p = relation_probability(OneHot(), X_CAUSES_Y, (1, 2), inv_one)
    assert p == 0.7


def test_uniform_scorer_convexity(inventory):
    class Half(Scorer):
        def score(self, q):
            return 0.5

    assert relation_probability(Half(), X_CAUSES_Y, (3, 4), inventory) == 0.5


def test_ground_truth_ordering_on_true_edge(gc, sets, inventory):
    gt = GroundTruthOracle(gc)
    pair = sets.causal[0]
    p_xy = relation_probability(gt, X_CAUSES_Y, pair, inventory)
    assert p_xy > relation_probability(gt, Y_CAUSES_X, pair, inventory)
    assert p_xy > relation_probability(gt, NO_RELATION, pair, inventory)


def test_mc_predict_argmax(inventory):
    scorer = MappedScorer({("causal", 1, 2): 0.7, ("causal", 2, 1): 0.2, ("no_relation",): 0.3})
    assert mc_predict(scorer, (1, 2), THREE_WAY, inventory) == X_CAUSES_Y


def test_mc_predict_scale_invariance(inventory):
    base = {("causal", 1, 2): 0.5, ("causal", 2, 1): 0.02, ("no_relation",): 0.3}
    plain = MappedScorer(base)
    scaled = MappedScorer(base, transform=lambda p: 1.9 * p)
    monotone = MappedScorer(base, transform=math.sqrt)
    for options in (THREE_WAY, (X_CAUSES_Y, X_NOT_CAUSES_Y)):
        want = mc_predict(plain, (1, 2), options, inventory)
        assert mc_predict(scaled, (1, 2), options, inventory) == want
        assert mc_predict(monotone, (1, 2), options, inventory) == want


def test_three_way_probabilities_renormalize(gc, sets, inventory):
    gt = GroundTruthOracle(gc)
    for pair in sets.causal[:10]:
        probs = [relation_probability(gt, r, pair, inventory) for r in THREE_WAY]
        total = sum(probs)
        assert abs(sum(p / total for p in probs) - 1.0) < 1e-9


def test_ground_truth_perfect_on_all_tasks(gc, sets, inventory):
    gt = GroundTruthOracle(gc)
    assert run_task(gt, "infer_causal", sets, inventory).accuracy == 1.0
    assert run_task(gt, "infer_nocausal", sets, inventory).accuracy == 1.0
    assert run_task(gt, "infer_notcause", sets, inventory, over="causal").accuracy == 1.0
    assert run_task(gt, "infer_notcause", sets, inventory, over="unrelated").accuracy == 1.0
    assert run_task(gt, "alt_two_way", sets, inventory).accuracy == 1.0


def test_uniform_oracle_near_chance(gc, sets, inventory):
    uni = UniformOracle()
    rng = np.random.default_rng(17)
    three = run_task(uni, "infer_nocausal", sets, inventory, tie="random", tie_rng=rng)
    assert abs(three.accuracy - 1 / 3) <= 0.03
    two = run_task(uni, "infer_notcause", sets, inventory, over="unrelated", tie="random", tie_rng=rng)
    assert abs(two.accuracy - 0.5) <= 0.03
    assert three.ties == three.n


def test_histogram_sums_to_n(gc, sets, inventory):
    for tie in ("fixed", "split"):
        rep = run_task(UniformOracle(), "infer_causal", sets, inventory, tie=tie)
        assert abs(sum(rep.histogram.values()) - rep.n) < 1e-9


def test_unrelated_orientation_swap_invariance(gc, sets, inventory):
    gt = GroundTruthOracle(gc)
    swapped = TestSets(causal=sets.causal, unrelated=tuple((y, x) for x, y in sets.unrelated[:200]))
    plain = TestSets(causal=sets.causal, unrelated=sets.unrelated[:200])
    a = run_task(gt, "infer_nocausal", plain, inventory).accuracy
    b = run_task(gt, "infer_nocausal", swapped, inventory).accuracy
    assert a == b


def test_run_task_pairing_errors(gc, sets, inventory):
    with pytest.raises(DataError):
        run_task(UniformOracle(), "infer_causal", sets, inventory, over="unrelated")
    with pytest.raises(DataError):
        run_task(UniformOracle(), "bogus", sets, inventory)


def test_pairs_restriction_skips_foreign_pairs(gc, sets, inventory):
    gt = GroundTruthOracle(gc)
    pairs = list(sets.causal[:5]) + [(998, 999)]
    rep = run_task(gt, "infer_causal", sets, inventory, pairs=pairs)
    assert rep.n == 5 and rep.pairs_skipped == 1


def test_covered_pairs_filter():
    counts = {(1, 2): 3, (4, 3): 1}
    pairs = [(1, 2), (3, 4), (5, 6)]
    assert covered_pairs(counts, pairs) == [(1, 2), (3, 4)]


def test_query_positions(inventory):
    # rendering Y->X at pair position xy uses effect-first templates
    for q in build_queries(Y_CAUSES_X, (3, 9), inventory, position="xy"):
        assert q.first == 3 and q.second == 9
        assert q.cause == 9 and q.effect == 3
    for q in build_queries(X_CAUSES_Y, (3, 9), inventory, position="yx"):
        assert q.first == 9 and q.second == 3
        assert q.cause == 3 and q.effect == 9


def test_markdown_rendering_smoke(gc, sets, inventory):
    rep = run_task(GroundTruthOracle(gc), "infer_causal", sets, inventory)
    md = render_markdown({"task": rep.to_json_dict()}, title="t")
    assert "| option | weight |" in md
    assert "X→Y" in md


def test_five_relation_probabilities_exposed(gc, sets, inventory):
    from causaltext.evaluate import RELATIONS, five_relation_probabilities, post_hoc_report
    from causaltext.oracles import GroundTruthOracle

    gt = GroundTruthOracle(gc)
    pair = sets.causal[0]
    probs = five_relation_probabilities(gt, pair, inventory)
    assert set(probs) == set(RELATIONS)
    # on a true edge the not-cause claim holds only in the reverse direction
    assert probs[Y_NOT_CAUSES_X] > probs[X_NOT_CAUSES_Y]
    rep = post_hoc_report(gt, sets, inventory, pairs=sets.causal[:5])
    assert set(rep.mean_relation_probabilities) == set(RELATIONS)


def test_worker_count_env(monkeypatch):
    from causaltext.common import worker_count

    monkeypatch.setenv("CAUSALTEXT_WORKERS", "5")
    assert worker_count() == 5
    assert worker_count(2) == 2
    monkeypatch.delenv("CAUSALTEXT_WORKERS")
    assert worker_count() == 1
