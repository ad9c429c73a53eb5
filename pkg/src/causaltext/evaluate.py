"""Multiple-choice causal-relation evaluation.

Five relations over an ordered pair (X, Y): X->Y, Y->X, X-/>Y, Y-/>X and
X</>Y (no relation either way). Each relation's probability marginalizes
a template set uniformly, scoring only the final event mention of every
rendering. Multiple-choice tasks argmax over an exhaustive, disjoint
option set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from causaltext.common import DataError
from causaltext.graphs import CausalGraph, Reachability
from causaltext.scoring import Scorer, ScoreQuery
from causaltext.templates import Template, TemplateInventory

X_CAUSES_Y = "X->Y"
Y_CAUSES_X = "Y->X"
X_NOT_CAUSES_Y = "X-/>Y"
Y_NOT_CAUSES_X = "Y-/>X"
NO_RELATION = "X</>Y"

RELATIONS = (X_CAUSES_Y, Y_CAUSES_X, X_NOT_CAUSES_Y, Y_NOT_CAUSES_X, NO_RELATION)
THREE_WAY = (X_CAUSES_Y, Y_CAUSES_X, NO_RELATION)
TWO_WAY = (X_CAUSES_Y, X_NOT_CAUSES_Y)
TWO_WAY_REVERSE = (Y_CAUSES_X, Y_NOT_CAUSES_X)

PRETTY = {
    X_CAUSES_Y: "X→Y",
    Y_CAUSES_X: "Y→X",
    X_NOT_CAUSES_Y: "X↛Y",
    Y_NOT_CAUSES_X: "Y↛X",
    NO_RELATION: "X↮Y",
}


@dataclass(frozen=True)
class TestSets:
    """causal: ordered direct-edge pairs; unrelated: pairs with no
    ancestry either way (stored with x < y)."""

    __test__ = False  # not a pytest class, despite the name

    causal: tuple[tuple[int, int], ...]
    unrelated: tuple[tuple[int, int], ...]


def build_test_sets(gc: CausalGraph) -> TestSets:
    reach = Reachability(gc.vertices(), gc.children_of)
    causal = tuple(sorted(gc.edges))
    unrelated = []
    for x in gc.vertices():
        for y in gc.vertices():
            if x < y and reach.unrelated(x, y):
                unrelated.append((x, y))
    return TestSets(causal=causal, unrelated=tuple(sorted(unrelated)))


def _relation_binding(relation: str, pair: tuple[int, int]):
    """Template kind and slot values for scoring a relation over a pair."""
    x, y = pair
    if relation == X_CAUSES_Y:
        return "causal", x, y, True
    if relation == Y_CAUSES_X:
        return "causal", y, x, True
    if relation == X_NOT_CAUSES_Y:
        return "not_causal", x, y, True
    if relation == Y_NOT_CAUSES_X:
        return "not_causal", y, x, True
    if relation == NO_RELATION:
        return "no_relation", x, y, False
    raise DataError(f"unknown relation {relation!r}")


def _select_templates(
    inventory: TemplateInventory,
    kind: str,
    slot_x: int,
    pair: tuple[int, int],
    position: str,
) -> list[Template]:
    """Templates for a relation rendered at a pair mention position.

    ``position`` is "xy"/"yx" in terms of the pair under test, or
    "random" for the order-marginalized set. A template mentions its own
    slot x first when its resource position is xy; whether that is the
    pair's x depends on the slot binding.
    """
    members = inventory.set_for(kind, "random").members
    if position == "random":
        return list(members)
    if position not in ("xy", "yx"):
        raise DataError(f"bad render position {position!r}")
    desired_first = pair[0] if position == "xy" else pair[1]
    out = []
    for t in members:
        first_value = slot_x if t.position == "xy" else None
        if first_value is None:
            # slot y mentioned first; its value is the other slot's partner
            first_value = pair[0] + pair[1] - slot_x
        if first_value == desired_first:
            out.append(t)
    if not out:
        raise DataError(f"no {kind} templates render position {position} for {pair}")
    return out


def build_queries(
    relation: str,
    pair: tuple[int, int],
    inventory: TemplateInventory,
    position: str = "random",
    kind_override: str | None = None,
) -> list[ScoreQuery]:
    kind, slot_x, slot_y, directional = _relation_binding(relation, pair)
    if kind_override is not None:
        kind = kind_override
        directional = False
    queries = []
    for t in _select_templates(inventory, kind, slot_x, pair, position):
        prefix, completion = t.split_final_mention(slot_x, slot_y)
        first = slot_x if t.position == "xy" else slot_y
        second = slot_y if t.position == "xy" else slot_x
        queries.append(
            ScoreQuery(
                prefix=prefix,
                completion=completion,
                kind=kind,
                first=first,
                second=second,
                cause=slot_x if directional else None,
                effect=slot_y if directional else None,
                template_id=t.id,
            )
        )
    return queries


def _marginal_mean(probs: Sequence[float]) -> float:
    # a constant list averages to exactly that constant, so analytic
    # oracles keep exact ties across option sets of different sizes
    if all(p == probs[0] for p in probs):
        return probs[0]
    return math.fsum(probs) / len(probs)


def relation_probability(
    scorer: Scorer,
    relation: str,
    pair: tuple[int, int],
    inventory: TemplateInventory,
    position: str = "random",
) -> float:
    """Template-marginalized probability of one relation (uniform weights)."""
    queries = build_queries(relation, pair, inventory, position)
    probs = scorer.score_batch(queries)
    return _marginal_mean(probs)


def five_relation_probabilities(
    scorer: Scorer,
    pair: tuple[int, int],
    inventory: TemplateInventory,
    position: str = "random",
) -> dict[str, float]:
    """Marginalized probabilities of all five relations over one pair.

    The not-cause directions never enter the sanctioned option sets, but
    they are computable and reports surface them anyway.
    """
    return {
        rel: relation_probability(scorer, rel, pair, inventory, position)
        for rel in RELATIONS
    }


def _option_probabilities(
    scorer: Scorer,
    pair: tuple[int, int],
    options: Sequence[str],
    inventory: TemplateInventory,
    positions: dict[str, str] | None = None,
    kind_overrides: dict[str, str] | None = None,
) -> dict[str, float]:
    out = {}
    for rel in options:
        position = (positions or {}).get(rel, "random")
        override = (kind_overrides or {}).get(rel)
        queries = build_queries(rel, pair, inventory, position, kind_override=override)
        probs = scorer.score_batch(queries)
        out[rel] = _marginal_mean(probs)
    return out


def _prediction_weights(
    probs: dict[str, float],
    options: Sequence[str],
    tie: str = "fixed",
    tie_rng: np.random.Generator | None = None,
) -> tuple[dict[str, float], bool]:
    """Distribute one unit of prediction mass over the argmax set.

    fixed: first option in the given order wins ties; random: a draw from
    tie_rng picks; split: ties share mass equally (the expected histogram
    under randomized tie order).
    """
    best = max(probs[o] for o in options)
    winners = [o for o in options if probs[o] == best]
    tied = len(winners) > 1
    if not tied:
        return {winners[0]: 1.0}, False
    if tie == "fixed":
        return {winners[0]: 1.0}, True
    if tie == "random":
        if tie_rng is None:
            raise DataError("tie='random' needs a generator")
        return {winners[int(tie_rng.integers(len(winners)))]: 1.0}, True
    if tie == "split":
        share = 1.0 / len(winners)
        return {o: share for o in winners}, True
    raise DataError(f"unknown tie policy {tie!r}")


def mc_predict(
    scorer: Scorer,
    pair: tuple[int, int],
    options: Sequence[str],
    inventory: TemplateInventory,
    positions: dict[str, str] | None = None,
    tie: str = "fixed",
    tie_rng: np.random.Generator | None = None,
) -> str:
    """Argmax choice among options; deterministic tie-break by option order."""
    probs = _option_probabilities(scorer, pair, options, inventory, positions)
    if tie == "split":
        raise DataError("mc_predict returns one choice; use run_task for split ties")
    weights, _ = _prediction_weights(probs, options, tie, tie_rng)
    return next(iter(weights))


@dataclass
class TaskReport:
    task: str
    over: str
    options: tuple[str, ...]
    target: str
    n: int
    accuracy: float
    histogram: dict[str, float]
    ties: int
    pairs_skipped: int = 0

    def to_json_dict(self) -> dict:
        return {
            "task": self.task,
            "over": self.over,
            "options": list(self.options),
            "target": self.target,
            "n": self.n,
            "accuracy": self.accuracy,
            "histogram": self.histogram,
            "ties": self.ties,
            "pairs_skipped": self.pairs_skipped,
        }


_TASKS = {
    # task -> {test set -> (options, target)}
    "infer_causal": {"causal": (THREE_WAY, X_CAUSES_Y)},
    "infer_nocausal": {"unrelated": (THREE_WAY, NO_RELATION)},
    "infer_notcause": {
        "causal": (TWO_WAY_REVERSE, Y_NOT_CAUSES_X),
        "unrelated": (TWO_WAY, X_NOT_CAUSES_Y),
    },
    "alt_two_way": {"causal": (TWO_WAY, X_CAUSES_Y)},
}

TASK_NAMES = tuple(_TASKS)


def _accumulate(
    scorer: Scorer,
    pairs: Iterable[tuple[int, int]],
    options: Sequence[str],
    inventory: TemplateInventory,
    positions: dict[str, str] | None,
    tie: str,
    tie_rng,
    kind_overrides: dict[str, str] | None = None,
) -> tuple[dict[str, float], int, int]:
    histogram = {o: 0.0 for o in options}
    ties = 0
    n = 0
    for pair in pairs:
        probs = _option_probabilities(
            scorer, pair, options, inventory, positions, kind_overrides
        )
        weights, tied = _prediction_weights(probs, options, tie, tie_rng)
        for o, w in weights.items():
            histogram[o] += w
        ties += int(tied)
        n += 1
    return histogram, ties, n


def run_task(
    scorer: Scorer,
    task: str,
    sets: TestSets,
    inventory: TemplateInventory,
    over: str | None = None,
    pairs: Sequence[tuple[int, int]] | None = None,
    position: str = "random",
    tie: str = "fixed",
    tie_rng: np.random.Generator | None = None,
) -> TaskReport:
    """Run one multiple-choice task and report accuracy + histogram.

    ``pairs`` restricts evaluation (e.g. to pairs actually mentioned in
    the finetuning data); entries outside the chosen test set are skipped
    and counted.
    """
    if task not in _TASKS:
        raise DataError(f"unknown task {task!r}; know {sorted(_TASKS)}")
    valid = _TASKS[task]
    if over is None:
        if len(valid) != 1:
            raise DataError(f"task {task!r} needs over= one of {sorted(valid)}")
        over = next(iter(valid))
    if over not in valid:
        raise DataError(f"task {task!r} cannot run over {over!r} pairs")
    options, target = valid[over]
    base = sets.causal if over == "causal" else sets.unrelated
    skipped = 0
    if pairs is None:
        eval_pairs = list(base)
    else:
        base_set = set(base)
        eval_pairs = [p for p in pairs if tuple(p) in base_set]
        skipped = len(list(pairs)) - len(eval_pairs)
    positions = {o: position for o in options}
    histogram, ties, n = _accumulate(
        scorer, eval_pairs, options, inventory, positions, tie, tie_rng
    )
    accuracy = histogram[target] / n if n else float("nan")
    return TaskReport(
        task=task,
        over=over,
        options=tuple(options),
        target=target,
        n=n,
        accuracy=accuracy,
        histogram=histogram,
        ties=ties,
        pairs_skipped=skipped,
    )


@dataclass
class PositionReport:
    trained_majority: str
    matched: float
    mismatched: float
    by_condition: dict[str, float]
    n: int
    ties: dict[str, int]
    probe: bool

    def to_json_dict(self) -> dict:
        return {
            "trained_majority": self.trained_majority,
            "matched": self.matched,
            "mismatched": self.mismatched,
            "by_condition": self.by_condition,
            "n": self.n,
            "ties": self.ties,
            "probe": self.probe,
        }


def position_report(
    scorer: Scorer,
    sets: TestSets,
    inventory: TemplateInventory,
    trained_majority: str = "xy",
    pairs: Sequence[tuple[int, int]] | None = None,
    probe: bool = False,
    tie: str = "fixed",
    tie_rng: np.random.Generator | None = None,
) -> PositionReport:
    """Three-way accuracy with option renderings pinned to each mention
    order; the no-relation option always marginalizes both orders.

    With ``probe`` the two causal options are verbalized through the
    neutral unrelated-relation templates instead, which must not change a
    position-driven scorer's behavior.
    """
    if trained_majority not in ("xy", "yx"):
        raise DataError("trained_majority must be 'xy' or 'yx'")
    eval_pairs = list(pairs) if pairs is not None else list(sets.causal)
    overrides = {X_CAUSES_Y: "unrelated", Y_CAUSES_X: "unrelated"} if probe else None
    by_condition = {}
    ties = {}
    for condition in ("xy", "yx"):
        positions = {X_CAUSES_Y: condition, Y_CAUSES_X: condition, NO_RELATION: "random"}
        histogram, t, n = _accumulate(
            scorer, eval_pairs, THREE_WAY, inventory, positions, tie, tie_rng, overrides
        )
        by_condition[condition] = histogram[X_CAUSES_Y] / n if n else float("nan")
        ties[condition] = t
    other = "yx" if trained_majority == "xy" else "xy"
    return PositionReport(
        trained_majority=trained_majority,
        matched=by_condition[trained_majority],
        mismatched=by_condition[other],
        by_condition=by_condition,
        n=len(eval_pairs),
        ties=ties,
        probe=probe,
    )


@dataclass
class PostHocReport:
    error_rate: float
    n: int
    histogram: dict[str, float]
    ties: int
    mean_relation_probabilities: dict[str, float] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "error_rate": self.error_rate,
            "n": self.n,
            "histogram": self.histogram,
            "ties": self.ties,
            "mean_relation_probabilities": self.mean_relation_probabilities,
        }


def post_hoc_report(
    scorer: Scorer,
    sets: TestSets,
    inventory: TemplateInventory,
    pairs: Sequence[tuple[int, int]] | None = None,
    tie: str = "fixed",
    tie_rng: np.random.Generator | None = None,
) -> PostHocReport:
    """Rate of deducing X->Y over causal pairs with fully randomized
    rendering; high values mean the scorer turns temporal facts into
    causal claims."""
    eval_pairs = list(pairs) if pairs is not None else list(sets.causal)
    histogram, ties, n = _accumulate(
        scorer, eval_pairs, THREE_WAY, inventory, None, tie, tie_rng
    )
    error_rate = histogram[X_CAUSES_Y] / n if n else float("nan")
    sums = {rel: 0.0 for rel in RELATIONS}
    for pair in eval_pairs:
        for rel, p in five_relation_probabilities(scorer, pair, inventory).items():
            sums[rel] += p
    means = {rel: (s / n if n else float("nan")) for rel, s in sums.items()}
    return PostHocReport(
        error_rate=error_rate,
        n=n,
        histogram=histogram,
        ties=ties,
        mean_relation_probabilities=means,
    )


@dataclass
class FrequencyBucket:
    bucket: int
    n: int
    freq_min: int
    freq_max: int
    matched: float
    mismatched: float
    gap: float

    def to_json_dict(self) -> dict:
        return self.__dict__.copy()


def frequency_report(
    scorer: Scorer,
    sets: TestSets,
    inventory: TemplateInventory,
    frequencies: dict[tuple[int, int], int],
    trained_majority: str = "xy",
    buckets: int = 10,
    pairs: Sequence[tuple[int, int]] | None = None,
    tie: str = "fixed",
    tie_rng: np.random.Generator | None = None,
) -> list[FrequencyBucket]:
    """Matched-minus-mismatched accuracy gap per training-frequency bucket.

    Causal pairs are sorted by how often their temporal fact occurs in the
    training data and split into equal-size buckets, lowest first.
    """
    eval_pairs = list(pairs) if pairs is not None else list(sets.causal)
    ranked = sorted(eval_pairs, key=lambda p: (frequencies.get(p, 0), p))
    chunks = [c for c in np.array_split(np.arange(len(ranked)), buckets) if len(c)]
    out = []
    for b, chunk in enumerate(chunks):
        bucket_pairs = [ranked[int(i)] for i in chunk]
        rep = position_report(
            scorer,
            sets,
            inventory,
            trained_majority=trained_majority,
            pairs=bucket_pairs,
            tie=tie,
            tie_rng=tie_rng,
        )
        freqs = [frequencies.get(p, 0) for p in bucket_pairs]
        out.append(
            FrequencyBucket(
                bucket=b,
                n=len(bucket_pairs),
                freq_min=min(freqs),
                freq_max=max(freqs),
                matched=rep.matched,
                mismatched=rep.mismatched,
                gap=rep.matched - rep.mismatched,
            )
        )
    return out


@dataclass
class SeenUnseenReport:
    seen: dict
    unseen: dict

    def to_json_dict(self) -> dict:
        return {"seen": self.seen, "unseen": self.unseen}


def seen_unseen_report(
    scorer: Scorer,
    seen_pairs: Sequence[tuple[int, int]],
    unseen_pairs: Sequence[tuple[int, int]],
    inventory: TemplateInventory,
    tie: str = "fixed",
    tie_rng: np.random.Generator | None = None,
) -> SeenUnseenReport:
    """Three-way prediction distribution on the seen vs unseen causal
    edges of an augmented dataset (randomized rendering)."""
    out = {}
    for label, subset in (("seen", seen_pairs), ("unseen", unseen_pairs)):
        histogram, ties, n = _accumulate(
            scorer, subset, THREE_WAY, inventory, None, tie, tie_rng
        )
        fractions = {o: (v / n if n else float("nan")) for o, v in histogram.items()}
        out[label] = {
            "n": n,
            "histogram": histogram,
            "fractions": fractions,
            "ties": ties,
        }
    return SeenUnseenReport(seen=out["seen"], unseen=out["unseen"])


def covered_pairs(
    mention_counts: dict[tuple[int, int], int],
    pairs: Iterable[tuple[int, int]],
) -> list[tuple[int, int]]:
    """Pairs mentioned (in either order) in the training data; mirrors
    evaluating only event pairs the model saw during finetuning."""
    out = []
    for x, y in pairs:
        if mention_counts.get((x, y), 0) + mention_counts.get((y, x), 0) > 0:
            out.append((x, y))
    return out


def render_markdown(report: dict, title: str = "Evaluation report") -> str:
    """Human-readable tables for a JSON report."""
    lines = [f"# {title}", ""]

    def table(headers: list[str], rows: list[list]) -> None:
        lines.append("| " + " | ".join(headers) + " |")
        lines.append("|" + "|".join("---" for _ in headers) + "|")
        for row in rows:
            lines.append("| " + " | ".join(str(c) for c in row) + " |")
        lines.append("")

    def fmt(v) -> str:
        if isinstance(v, float):
            return "nan" if math.isnan(v) else f"{v:.4f}"
        return str(v)

    for section, body in report.items():
        if section == "provenance":
            continue
        lines.append(f"## {section}")
        lines.append("")
        if isinstance(body, dict) and "histogram" in body:
            meta = [
                [k, fmt(v)]
                for k, v in body.items()
                if not isinstance(v, (dict, list))
            ]
            table(["field", "value"], meta)
            table(
                ["option", "weight"],
                [[PRETTY.get(k, k), fmt(v)] for k, v in body["histogram"].items()],
            )
        elif isinstance(body, list) and body and isinstance(body[0], dict):
            headers = list(body[0])
            table(headers, [[fmt(row[h]) for h in headers] for row in body])
        elif isinstance(body, dict):
            table(["field", "value"], [[k, fmt(v)] for k, v in body.items() if not isinstance(v, (dict, list))])
            for sub, subbody in body.items():
                if isinstance(subbody, dict):
                    table(
                        [sub, "value"],
                        [[k, fmt(v)] for k, v in subbody.items() if not isinstance(v, (dict, list))],
                    )
        else:
            lines.append(str(body))
            lines.append("")
    return "\n".join(lines)
