"""Analytic scorers that embody hypothesized model behaviors.

Each oracle returns one of three probability levels; only their ordering
matters to multiple-choice argmax, so the harness's detections are
threshold-free. They read the structured fields of a query, and a text
adapter exists for the plain-text scorer contract.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from causaltext.common import DataError
from causaltext.graphs import CausalGraph, Reachability
from causaltext.scoring import Scorer, ScoreQuery


@dataclass(frozen=True)
class OracleParams:
    p_hi: float = 0.9
    p_lo: float = 0.01
    p_mid: float = 0.45

    def __post_init__(self):
        if not (0.0 < self.p_lo < self.p_mid < self.p_hi <= 1.0):
            raise ValueError(f"need 0 < p_lo < p_mid < p_hi <= 1, got {self}")


class PositionOracle(Scorer):
    """Scores by event mention order alone, ignoring the relation.

    A query mentioning (A, B) in that order gets p_hi when the training
    data's majority mention order for the pair is A-then-B, p_lo when it
    is B-then-A, p_mid on ties and unseen pairs. ``min_count`` treats
    pairs observed fewer times as unseen (frequency-thresholded variant).
    """

    name = "position"

    def __init__(
        self,
        mention_counts: dict[tuple[int, int], int],
        params: OracleParams = OracleParams(),
        min_count: int = 1,
    ):
        self.counts = dict(mention_counts)
        self.p = params
        self.min_count = max(1, min_count)

    def params(self) -> dict:
        return {"pairs": len(self.counts), "min_count": self.min_count}

    def score(self, q: ScoreQuery) -> float:
        if q.second is None:
            return self.p.p_mid
        ab = self.counts.get((q.first, q.second), 0)
        ba = self.counts.get((q.second, q.first), 0)
        if ab + ba < self.min_count or ab == ba:
            return self.p.p_mid
        return self.p.p_hi if ab > ba else self.p.p_lo


class PostHocOracle(Scorer):
    """Applies the invalid rule "X before Y, therefore X causes Y".

    Order-invariant: a causal claim scores p_hi when the training data
    holds a temporal fact with the claimed cause first, p_lo when the
    temporal fact points the other way, p_mid otherwise.
    """

    name = "post_hoc"

    def __init__(self, temporal_facts: Iterable[tuple[int, int]], params: OracleParams = OracleParams()):
        self.facts = set(temporal_facts)
        self.p = params

    def params(self) -> dict:
        return {"facts": len(self.facts)}

    def score(self, q: ScoreQuery) -> float:
        if q.kind == "causal" and q.cause is not None:
            if (q.cause, q.effect) in self.facts:
                return self.p.p_hi
            if (q.effect, q.cause) in self.facts:
                return self.p.p_lo
        return self.p.p_mid


class TemporalPrecedenceOracle(Scorer):
    """Applies only the valid rule "X before Y, therefore Y cannot cause X"."""

    name = "temporal_precedence"

    def __init__(self, temporal_facts: Iterable[tuple[int, int]], params: OracleParams = OracleParams()):
        self.facts = set(temporal_facts)
        self.p = params

    def params(self) -> dict:
        return {"facts": len(self.facts)}

    def score(self, q: ScoreQuery) -> float:
        if q.cause is None:
            return self.p.p_mid
        # claim's cause mentioned as happening after its effect in training
        backwards = (q.effect, q.cause) in self.facts
        if q.kind == "causal":
            return self.p.p_lo if backwards else self.p.p_mid
        if q.kind == "not_causal":
            return self.p.p_hi if backwards else self.p.p_mid
        return self.p.p_mid


class GroundTruthOracle(Scorer):
    """Upper-bound reference: scores every claim by the actual graph."""

    name = "ground_truth"

    def __init__(self, gc: CausalGraph, params: OracleParams = OracleParams()):
        self.edges = set(gc.edges)
        self.reach = Reachability(gc.vertices(), gc.children_of)
        self.p = params

    def params(self) -> dict:
        return {"edges": len(self.edges)}

    def score(self, q: ScoreQuery) -> float:
        if q.kind == "causal":
            true = (q.cause, q.effect) in self.edges
        elif q.kind == "not_causal":
            true = not self.reach.is_ancestor(q.cause, q.effect)
        elif q.kind == "no_relation":
            true = self.reach.unrelated(q.first, q.second)
        else:
            return self.p.p_mid
        return self.p.p_hi if true else self.p.p_lo


class UniformOracle(Scorer):
    """Chance floor: the same score for every query."""

    name = "uniform"

    def __init__(self, params: OracleParams = OracleParams()):
        self.p = params

    def score(self, q: ScoreQuery) -> float:
        return self.p.p_mid


class ExplicitMemorizerOracle(Scorer):
    """Memorizes explicit causal statements; prior elsewhere.

    Causal claims score p_hi for memorized edges and p_lo otherwise, so
    on pairs without a memorized statement the no-relation option (p_mid)
    wins: the prior prediction.
    """

    name = "memorizer"

    def __init__(
        self,
        causal_pairs: Iterable[tuple[int, int]],
        not_causal_pairs: Iterable[tuple[int, int]] = (),
        params: OracleParams = OracleParams(),
    ):
        self.causal = set(causal_pairs)
        self.not_causal = set()
        for a, b in not_causal_pairs:
            self.not_causal.add((a, b))
            self.not_causal.add((b, a))
        self.p = params

    def params(self) -> dict:
        return {"causal": len(self.causal), "not_causal": len(self.not_causal) // 2}

    def score(self, q: ScoreQuery) -> float:
        if q.kind == "causal" and q.cause is not None:
            return self.p.p_hi if (q.cause, q.effect) in self.causal else self.p.p_lo
        if q.kind == "no_relation" and (q.first, q.second) in self.not_causal:
            return self.p.p_hi
        return self.p.p_mid


class TextAdapter(Scorer):
    """Plain-text front for an oracle: parses prefix+completion back into
    a structured query, then delegates."""

    name = "text_adapter"

    def __init__(self, inner: Scorer, parser):
        self.inner = inner
        self.parser = parser

    def params(self) -> dict:
        return {"inner": self.inner.name}

    def score(self, q: ScoreQuery) -> float:
        parsed = self.parser.parse(q.sentence())
        if parsed is None:
            raise DataError(f"cannot parse scored sentence: {q.sentence()!r}")
        rebuilt = ScoreQuery(
            prefix=q.prefix,
            completion=q.completion,
            kind=parsed.kind,
            first=parsed.first,
            second=parsed.second,
            cause=parsed.x if parsed.kind in ("causal", "not_causal") else None,
            effect=parsed.y if parsed.kind in ("causal", "not_causal") else None,
            template_id=parsed.template_id,
        )
        return self.inner.score(rebuilt)


def _pairs_from_keys(raw: dict) -> dict[tuple[int, int], int]:
    out = {}
    for key, c in raw.items():
        a, b = key.split(",")
        out[(int(a), int(b))] = c
    return out


def build_oracle(
    name: str,
    gc: CausalGraph | None = None,
    manifest: dict | None = None,
    params: OracleParams = OracleParams(),
    **kwargs,
) -> Scorer:
    """Construct an oracle by name, pulling training statistics from a
    dataset manifest where the behavior calls for them."""

    def need_manifest() -> dict:
        if manifest is None:
            raise DataError(f"oracle {name!r} needs a dataset manifest")
        return manifest

    if name == "uniform":
        return UniformOracle(params)
    if name == "ground_truth":
        if gc is None:
            raise DataError("oracle 'ground_truth' needs the causal graph")
        return GroundTruthOracle(gc, params)
    if name == "position":
        counts = _pairs_from_keys(need_manifest()["counts"]["train"]["mention_orders"])
        min_count = int(kwargs.get("min_count", 1))
        return PositionOracle(counts, params, min_count=min_count)
    if name in ("post_hoc", "temporal_precedence"):
        facts = _pairs_from_keys(need_manifest()["counts"]["train"]["temporal_pairs"])
        cls = PostHocOracle if name == "post_hoc" else TemporalPrecedenceOracle
        return cls(set(facts), params)
    if name == "memorizer":
        aug = need_manifest().get("augmentation")
        if not aug:
            raise DataError("oracle 'memorizer' needs an augmented dataset manifest")
        return ExplicitMemorizerOracle(
            causal_pairs={tuple(e) for e in aug["seen_edges"]},
            not_causal_pairs={tuple(p) for p in aug["explicit_not_causal_pairs"]},
            params=params,
        )
    raise DataError(f"unknown oracle {name!r}")
