"""Sampling of causally-independent event chains and relation scenarios."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from causaltext.graphs import CausalGraph, Reachability, RelationGraph

TEMPORAL = "temporal"
SPATIAL_POS = "spatial_pos"
SPATIAL_NEG = "spatial_neg"
CF_POS = "cf_pos"
CF_NEG = "cf_neg"
OCCURRENCE = "occurrence"
EXPLICIT_CAUSAL = "explicit_causal"
EXPLICIT_NOT_CAUSAL = "explicit_not_causal"

RELATION_KINDS = (
    TEMPORAL,
    SPATIAL_POS,
    SPATIAL_NEG,
    CF_POS,
    CF_NEG,
    OCCURRENCE,
    EXPLICIT_CAUSAL,
    EXPLICIT_NOT_CAUSAL,
)

_CHAIN_COUNT_P = 0.25
_NON_OCCURRING_P = 0.2


@dataclass(frozen=True)
class RelationInstance:
    """One typed, directed relation fact; y is absent only for occurrence."""

    kind: str
    x: int
    y: int | None = None

    def __post_init__(self):
        if self.kind not in RELATION_KINDS:
            raise ValueError(f"unknown relation kind {self.kind!r}")
        if (self.y is None) != (self.kind == OCCURRENCE):
            raise ValueError(f"kind {self.kind} and y={self.y} do not agree")
        if self.x == self.y:
            raise ValueError("relation needs two distinct events")

    def to_list(self) -> list:
        return [self.kind, self.x, self.y]

    @staticmethod
    def from_list(item: Sequence) -> "RelationInstance":
        return RelationInstance(item[0], item[1], item[2])


@dataclass(frozen=True)
class EventChain:
    root: int
    path: tuple[int, ...]
    occurring: bool = True

    def to_dict(self) -> dict:
        return {"root": self.root, "path": list(self.path), "occurring": self.occurring}

    @staticmethod
    def from_dict(d: dict) -> "EventChain":
        return EventChain(d["root"], tuple(d["path"]), d["occurring"])


@dataclass
class Scenario:
    chains: list[EventChain]
    relations: list[RelationInstance]
    seed_offset: int = 0


@dataclass(frozen=True)
class RelationMix:
    """Which relation families a scenario samples, and at what rates."""

    kinds: tuple[str, ...] = ("temporal", "spatial", "counterfactual")
    occurrence_facts: bool = True
    temporal_rate: float = 0.5
    spatial_rate: float = 0.4
    counterfactual_rate: float = 0.4
    cross_counterfactual_rate: float = 0.2


class GraphIndex:
    """Precomputed reachability and per-root shortest-path structure."""

    def __init__(self, gc: CausalGraph, gn: RelationGraph | None = None):
        self.gc = gc
        self.gn = gn
        self.reach = Reachability(gc.vertices(), gc.children_of)
        self.type_reach = (
            Reachability(gn.vertices(), gn.children_of) if gn is not None else None
        )
        self._per_root = {r: self._bfs(r) for r in gc.roots}

    def _bfs(self, root: int):
        dist = {root: 0}
        counts = {root: 1}
        preds: dict[int, list[int]] = {}
        layers: list[list[int]] = [[root]]
        frontier = [root]
        while frontier:
            nxt: set[int] = set()
            d = dist[frontier[0]]
            for u in frontier:
                for c in self.gc.children_of(u):
                    if c not in dist:
                        dist[c] = d + 1
                        nxt.add(c)
                        preds[c] = [u]
                        counts[c] = counts[u]
                    elif dist[c] == d + 1:
                        preds[c].append(u)
                        counts[c] += counts[u]
            if not nxt:
                break
            layer = sorted(nxt)
            layers.append(layer)
            frontier = layer
        return {"dist": dist, "counts": counts, "preds": preds, "layers": layers}

    def eccentricity(self, root: int) -> int:
        return len(self._per_root[root]["layers"]) - 1

    def layer(self, root: int, m: int) -> list[int]:
        layers = self._per_root[root]["layers"]
        return layers[m] if m < len(layers) else []

    def sample_shortest_path(self, root: int, endpoint: int, rng: np.random.Generator) -> tuple[int, ...]:
        """Uniform draw among shortest root -> endpoint paths."""
        info = self._per_root[root]
        counts, preds = info["counts"], info["preds"]
        path = [endpoint]
        v = endpoint
        while v != root:
            options = sorted(preds[v])
            weights = [counts[u] for u in options]
            total = float(sum(weights))
            t = rng.random() * total
            acc = 0.0
            pick = options[-1]
            for u, w in zip(options, weights):
                acc += float(w)
                if t < acc:
                    pick = u
                    break
            path.append(pick)
            v = pick
        return tuple(reversed(path))

    def type_precedes(self, x: int, y: int) -> bool:
        """All events of x's type precede events of y's type."""
        if self.gn is None or self.type_reach is None:
            raise ValueError("GraphIndex was built without a relation graph")
        tx, ty = self.gn.type_of[x], self.gn.type_of[y]
        return tx != ty and self.type_reach.is_ancestor(tx, ty)

    def co_occur(self, x: int, y: int) -> bool:
        if self.gn is None:
            raise ValueError("GraphIndex was built without a relation graph")
        return self.gn.co_occur(x, y)


def sample_event_chains(
    gc: CausalGraph,
    rng: np.random.Generator,
    index: GraphIndex | None = None,
    max_retries: int = 1000,
    stats: dict | None = None,
) -> list[EventChain]:
    """Sample mutually causally-independent root-to-descendant chains.

    The chain count follows 1 + Geometric(0.25) capped at the root count;
    per chain a target depth is drawn uniformly and walked down until an
    endpoint exists that descends from no other sampled root. A Binomial
    share of chains is flagged non-occurring. Pathological root sets (no
    reachable endpoint at any depth) are resampled, bounded by
    ``max_retries``; the retry count is surfaced through ``stats``.
    """
    if index is None:
        index = GraphIndex(gc)
    roots = sorted(gc.roots)
    for _ in range(max_retries):
        n_chains = min(int(rng.geometric(_CHAIN_COUNT_P)), len(roots))
        picked = rng.choice(len(roots), size=n_chains, replace=False)
        sampled_roots = [roots[int(i)] for i in picked]
        chains: list[EventChain] = []
        failed = False
        for r in sampled_roots:
            forbidden = 0
            for other in sampled_roots:
                if other != r:
                    forbidden |= index.reach.descendant_mask(other)
            ecc = index.eccentricity(r)
            m = 1 + int(rng.integers(ecc))
            endpoints: list[int] = []
            while m >= 1:
                endpoints = [
                    v for v in index.layer(r, m) if not index.reach.in_mask(v, forbidden)
                ]
                if endpoints:
                    break
                m -= 1
            if not endpoints:
                failed = True
                break
            e = endpoints[int(rng.integers(len(endpoints)))]
            path = index.sample_shortest_path(r, e, rng)
            chains.append(EventChain(root=r, path=path, occurring=True))
        if failed:
            if stats is not None:
                stats["chain_resamples"] = stats.get("chain_resamples", 0) + 1
            continue
        k = int(rng.binomial(len(chains) - 1, _NON_OCCURRING_P)) if len(chains) > 1 else 0
        if k:
            drop = {int(i) for i in rng.choice(len(chains), size=k, replace=False)}
            chains = [
                EventChain(c.root, c.path, occurring=(i not in drop))
                for i, c in enumerate(chains)
            ]
        return chains
    raise RuntimeError(f"no valid chain set found in {max_retries} attempts")


def _pick_events(rng: np.random.Generator, seq: Sequence[int], k: int) -> list[int]:
    if k <= 0:
        return []
    idx = rng.choice(len(seq), size=min(k, len(seq)), replace=False)
    return [seq[int(i)] for i in idx]


def _partner(rng: np.random.Generator, pool: Sequence[int], x: int) -> int | None:
    reduced = [e for e in pool if e != x]
    if not reduced:
        return None
    return reduced[int(rng.integers(len(reduced)))]


def sample_scenario(
    gc: CausalGraph,
    gn: RelationGraph,
    chains: list[EventChain],
    rng: np.random.Generator,
    mix: RelationMix = RelationMix(),
    index: GraphIndex | None = None,
    seed_offset: int = 0,
) -> Scenario:
    """Sample relation facts for the occurring chains of one scenario.

    Per chain: temporal partners come from the whole occurring pool and
    the direction follows type ancestry (fair coin when the types are
    unordered and distinct); spatial polarity is same-chain-or-same-type;
    counterfactual polarity is causal ancestry, once with within-chain
    partners and once with pool partners. Occurrence facts are emitted for
    every event that ended up in at least one relation.
    """
    if index is None:
        index = GraphIndex(gc, gn)
    occurring = [c for c in chains if c.occurring]
    pool = sorted({e for c in occurring for e in c.path})
    blocks: list[list[RelationInstance]] = []
    for chain in occurring:
        rels: list[RelationInstance] = []
        length = len(chain.path)
        chain_set = set(chain.path)
        if "temporal" in mix.kinds:
            for x in _pick_events(rng, chain.path, int(rng.binomial(length, mix.temporal_rate))):
                y = _partner(rng, pool, x)
                if y is None:
                    continue
                if index.type_precedes(x, y):
                    rels.append(RelationInstance(TEMPORAL, x, y))
                elif index.type_precedes(y, x):
                    rels.append(RelationInstance(TEMPORAL, y, x))
                elif not index.co_occur(x, y):
                    if rng.random() < 0.5:
                        rels.append(RelationInstance(TEMPORAL, x, y))
                    else:
                        rels.append(RelationInstance(TEMPORAL, y, x))
        if "spatial" in mix.kinds:
            for x in _pick_events(rng, chain.path, int(rng.binomial(length, mix.spatial_rate))):
                y = _partner(rng, pool, x)
                if y is None:
                    continue
                if y in chain_set or index.co_occur(x, y):
                    rels.append(RelationInstance(SPATIAL_POS, x, y))
                else:
                    rels.append(RelationInstance(SPATIAL_NEG, x, y))
        if "counterfactual" in mix.kinds:
            for x in _pick_events(rng, chain.path, int(rng.binomial(length, mix.counterfactual_rate))):
                y = _partner(rng, chain.path, x)
                if y is None:
                    continue
                kind = CF_POS if index.reach.is_ancestor(x, y) else CF_NEG
                rels.append(RelationInstance(kind, x, y))
            for x in _pick_events(rng, chain.path, int(rng.binomial(length, mix.cross_counterfactual_rate))):
                y = _partner(rng, pool, x)
                if y is None:
                    continue
                kind = CF_POS if index.reach.is_ancestor(x, y) else CF_NEG
                rels.append(RelationInstance(kind, x, y))
        blocks.append(rels)

    # exact duplicates carry no information and skew frequency counts
    seen: set[tuple] = set()
    deduped: list[list[RelationInstance]] = []
    for rels in blocks:
        out = []
        for ri in rels:
            key = (ri.kind, ri.x, ri.y)
            if key in seen:
                continue
            seen.add(key)
            out.append(ri)
        deduped.append(out)

    used: set[int] = set()
    for rels in deduped:
        for ri in rels:
            used.add(ri.x)
            if ri.y is not None:
                used.add(ri.y)

    relations: list[RelationInstance] = []
    for chain, rels in zip(occurring, deduped):
        if mix.occurrence_facts:
            for e in chain.path:
                if e in used:
                    relations.append(RelationInstance(OCCURRENCE, e))
        relations.extend(rels)
    return Scenario(chains=list(chains), relations=relations, seed_offset=seed_offset)


def check_chains(gc: CausalGraph, chains: list[EventChain], index: GraphIndex) -> list[str]:
    """Violations of the chain invariants (empty list when clean)."""
    problems = []
    for c in chains:
        if c.path[0] != c.root or c.root not in gc.roots:
            problems.append(f"chain does not start at a root: {c}")
        for u, v in zip(c.path, c.path[1:]):
            if v not in gc.children_map[u]:
                problems.append(f"non-edge step {u}->{v} in chain {c}")
    for i, a in enumerate(chains):
        for b in chains[i + 1 :]:
            for u in a.path:
                for v in b.path:
                    if u == v or not index.reach.unrelated(u, v):
                        problems.append(f"chains not causally independent: {u},{v}")
    return problems


def check_scenario(
    gc: CausalGraph,
    gn: RelationGraph,
    scenario: Scenario,
    index: GraphIndex,
    mix: RelationMix = RelationMix(),
) -> list[str]:
    """Violations of the scenario emission rules (empty list when clean)."""
    problems = check_chains(gc, scenario.chains, index)
    occurring = [c for c in scenario.chains if c.occurring]
    occurring_events = {e for c in occurring for e in c.path}
    chain_of: dict[int, set[int]] = {}
    for c in occurring:
        for e in c.path:
            chain_of[e] = set(c.path)

    used: set[int] = set()
    occ_seen: set[int] = set()
    for ri in scenario.relations:
        events = [ri.x] + ([ri.y] if ri.y is not None else [])
        for e in events:
            if e not in occurring_events:
                problems.append(f"relation {ri} uses event outside occurring chains")
        if ri.kind == OCCURRENCE:
            occ_seen.add(ri.x)
            continue
        used.update(events)
        x, y = ri.x, ri.y
        if ri.kind == TEMPORAL:
            if index.co_occur(x, y):
                problems.append(f"temporal between co-occurring events: {ri}")
            elif index.type_precedes(y, x):
                problems.append(f"temporal against type order: {ri}")
        elif ri.kind in (SPATIAL_POS, SPATIAL_NEG):
            same = (y in chain_of.get(x, ())) or index.co_occur(x, y)
            if (ri.kind == SPATIAL_POS) != same:
                problems.append(f"spatial polarity wrong: {ri}")
        elif ri.kind in (CF_POS, CF_NEG):
            anc = index.reach.is_ancestor(x, y)
            if (ri.kind == CF_POS) != anc:
                problems.append(f"counterfactual polarity wrong: {ri}")
    if mix.occurrence_facts:
        if occ_seen != used:
            problems.append(
                f"occurrence facts {sorted(occ_seen)} do not match used events {sorted(used)}"
            )
    return problems
