"""Random causal graphs and the event-type relation graph layered on top.

Events are integers 1..n, rendered in text as "event<N>". The causal graph
is a DAG of direct cause -> effect edges. The relation graph assigns every
event a type drawn from a totally ordered type list; the type order is a
linear extension of causal ancestry, and two events of the same type
"co-occur" (same time and place) and are never causally related.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from causaltext.common import DataError, atomic_write_text, canonical_json

DEFAULT_NUM_EVENTS = 100
_ROOT_GEOMETRIC_P = 0.64
_ROOT_RANGE = (3, 6)
_ZIPF_EXPONENT = 3.0


def event_label(v: int) -> str:
    return f"event{v}"


@dataclass(frozen=True)
class CausalGraph:
    """DAG over events 1..n; roots have no parents and at least one child."""

    n: int
    roots: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    seed: int | None = None

    @cached_property
    def children_map(self) -> dict[int, tuple[int, ...]]:
        m: dict[int, list[int]] = {v: [] for v in self.vertices()}
        for u, v in self.edges:
            m[u].append(v)
        return {v: tuple(sorted(c)) for v, c in m.items()}

    @cached_property
    def parent_map(self) -> dict[int, tuple[int, ...]]:
        m: dict[int, list[int]] = {v: [] for v in self.vertices()}
        for u, v in self.edges:
            m[v].append(u)
        return {v: tuple(sorted(p)) for v, p in m.items()}

    def vertices(self) -> tuple[int, ...]:
        return tuple(range(1, self.n + 1))

    def children_of(self, v: int) -> tuple[int, ...]:
        return self.children_map[v]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "roots": list(self.roots),
            "edges": [list(e) for e in self.edges],
        }


@dataclass(frozen=True)
class RelationGraph:
    """Typed view of a causal graph.

    ``types`` lists type ids in temporal order (earlier types precede later
    ones); ``type_of`` maps every event to a type id; ``edges`` are the type
    edges mirroring the causal edges.
    """

    types: tuple[int, ...]
    type_of: dict[int, int] = field(compare=True)
    edges: tuple[tuple[int, int], ...] = ()

    @cached_property
    def position_of(self) -> dict[int, int]:
        return {t: i for i, t in enumerate(self.types)}

    @cached_property
    def children_map(self) -> dict[int, tuple[int, ...]]:
        m: dict[int, list[int]] = {t: [] for t in self.types}
        for u, v in self.edges:
            m[u].append(v)
        return {t: tuple(sorted(c)) for t, c in m.items()}

    def vertices(self) -> tuple[int, ...]:
        return self.types

    def children_of(self, t: int) -> tuple[int, ...]:
        return self.children_map[t]

    def type_index(self, event: int) -> int:
        return self.position_of[self.type_of[event]]

    def co_occur(self, u: int, v: int) -> bool:
        return self.type_of[u] == self.type_of[v]


class Reachability:
    """Ancestor/descendant bitsets for a DAG; O(1) pair queries."""

    def __init__(self, vertices: Sequence[int], children_of: Callable[[int], Iterable[int]]):
        verts = sorted(vertices)
        self._bit = {v: i for i, v in enumerate(verts)}
        self._verts = verts
        order = _topological_order(verts, children_of)
        anc: dict[int, int] = {v: 0 for v in verts}
        for v in order:
            mv = anc[v] | (1 << self._bit[v])
            for c in children_of(v):
                anc[c] |= mv
        desc: dict[int, int] = {v: 0 for v in verts}
        for v in reversed(order):
            m = 0
            for c in children_of(v):
                m |= desc[c] | (1 << self._bit[c])
            desc[v] = m
        self._anc = anc
        self._desc = desc

    def _check(self, v: int) -> None:
        if v not in self._bit:
            raise KeyError(f"unknown vertex {v!r}")

    def is_ancestor(self, u: int, v: int) -> bool:
        """True when u is a strict ancestor of v."""
        self._check(u)
        self._check(v)
        return bool(self._anc[v] >> self._bit[u] & 1)

    def unrelated(self, u: int, v: int) -> bool:
        return not self.is_ancestor(u, v) and not self.is_ancestor(v, u)

    def ancestors(self, v: int) -> set[int]:
        self._check(v)
        return self._unpack(self._anc[v])

    def descendants(self, v: int) -> set[int]:
        self._check(v)
        return self._unpack(self._desc[v])

    def descendant_mask(self, v: int) -> int:
        self._check(v)
        return self._desc[v]

    def mask_of(self, vs: Iterable[int]) -> int:
        m = 0
        for v in vs:
            m |= 1 << self._bit[v]
        return m

    def in_mask(self, v: int, mask: int) -> bool:
        return bool(mask >> self._bit[v] & 1)

    def _unpack(self, mask: int) -> set[int]:
        out = set()
        for v in self._verts:
            if mask >> self._bit[v] & 1:
                out.add(v)
        return out


def _topological_order(vertices: Sequence[int], children_of) -> list[int]:
    """Deterministic topological order, smallest vertex id first among ready."""
    indeg = {v: 0 for v in vertices}
    for v in vertices:
        for c in children_of(v):
            indeg[c] += 1
    heap = [v for v in vertices if indeg[v] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for c in children_of(v):
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(heap, c)
    if len(order) != len(vertices):
        raise DataError("graph contains a cycle")
    return order


def ancestors(g: CausalGraph | RelationGraph, v: int) -> set[int]:
    return Reachability(g.vertices(), g.children_of).ancestors(v)


def descendants(g: CausalGraph | RelationGraph, v: int) -> set[int]:
    return Reachability(g.vertices(), g.children_of).descendants(v)


def distance(g: CausalGraph | RelationGraph, u: int, v: int) -> int | None:
    """Shortest directed path length u -> v, or None when unreachable."""
    if u not in set(g.vertices()) or v not in set(g.vertices()):
        raise KeyError(f"unknown vertex in ({u!r}, {v!r})")
    if u == v:
        return 0
    frontier = [u]
    seen = {u}
    d = 0
    while frontier:
        d += 1
        nxt = []
        for w in frontier:
            for c in g.children_of(w):
                if c == v:
                    return d
                if c not in seen:
                    seen.add(c)
                    nxt.append(c)
        frontier = nxt
    return None


def _zipf_truncated(rng: np.random.Generator, kmax: int, a: float = _ZIPF_EXPONENT) -> int:
    """P(k) proportional to k^-a on support [1, kmax], via inverse CDF."""
    if kmax <= 1:
        return 1
    w = np.arange(1, kmax + 1, dtype=float) ** -a
    c = np.cumsum(w)
    c /= c[-1]
    return int(np.searchsorted(c, rng.random(), side="left")) + 1


def _root_count(rng: np.random.Generator, n: int) -> int:
    """Geometric(0.64) conditioned on [3, 6]; degenerate cases for tiny n.

    Feasibility requires at least two non-roots when there are two or more
    roots (otherwise some vertex must descend from every root), so the
    count is additionally capped at n - 2.
    """
    if n < 4:
        return 1
    hi = min(_ROOT_RANGE[1], n - 2)
    lo = min(_ROOT_RANGE[0], hi)
    ks = np.arange(lo, hi + 1)
    w = (1.0 - _ROOT_GEOMETRIC_P) ** ks
    c = np.cumsum(w)
    c /= c[-1]
    return int(ks[np.searchsorted(c, rng.random(), side="left")])


def _try_generate(n: int, r: int, rng: np.random.Generator):
    """One construction attempt over internal ids 0..n-1 (roots 0..r-1).

    Returns (children, parents) adjacency lists or None when the root
    fix-up cannot keep the no-descendant-of-all-roots invariant.
    """
    children: list[list[int]] = [[] for _ in range(n)]
    parents: list[list[int]] = [[] for _ in range(n)]
    full = (1 << r) - 1
    # root-ancestor bitmask per vertex; exact while edges only enter the
    # newest vertex
    rootanc = [0] * n
    for i in range(r, n):
        m = _zipf_truncated(rng, i)
        picks = rng.choice(i, size=min(m, i), replace=False)
        for p in picks.tolist():
            gain = rootanc[p] | ((1 << p) if p < r else 0)
            new = rootanc[i] | gain
            if new == full and r >= 2:
                # with a single root the rule would reject every edge out
                # of the root's cone; the invariant is waived there
                continue  # vertex would descend from every root
            children[p].append(i)
            parents[i].append(p)
            rootanc[i] = new

    def desc_masks() -> list[int]:
        dm = [0] * n
        for v in range(n - 1, -1, -1):
            m = 0
            for c in children[v]:
                m |= dm[c] | (1 << c)
            dm[v] = m
        return dm

    for ri in range(r):
        if children[ri]:
            continue
        dm = desc_masks()
        if r == 1:
            cands = list(range(r, n))
        else:
            cands = []
            for v in range(r, n):
                cone = dm[v] | (1 << v)
                ok = True
                w = v
                # walk the cone: any member already descending from all
                # other roots would close the full set
                for w in range(r, n):
                    if cone >> w & 1 and (rootanc[w] | (1 << ri)) == full:
                        ok = False
                        break
                if ok:
                    cands.append(v)
        if not cands:
            return None
        v = int(cands[int(rng.integers(len(cands)))])
        children[ri].append(v)
        parents[v].append(ri)
        cone = desc_masks()[v] | (1 << v)
        for w in range(n):
            if cone >> w & 1:
                rootanc[w] |= 1 << ri
    if r >= 2 and any(rootanc[v] == full for v in range(n)):
        return None
    return children, parents


def gen_causal_graph(
    n: int,
    rng: np.random.Generator,
    seed: int | None = None,
    max_attempts: int = 100,
) -> CausalGraph:
    """Generate a causal DAG with the structural constraints.

    Per non-root vertex the parent count follows a truncated Zipf(3);
    edges that would make a vertex a descendant of every root are
    rejected; childless roots get one valid child; vertex labels are a
    uniform shuffle at the end.
    """
    if n < 2:
        raise ValueError(f"need at least 2 events, got {n}")
    for _ in range(max_attempts):
        r = _root_count(rng, n)
        built = _try_generate(n, r, rng)
        if built is None:
            continue
        children, _ = built
        perm = rng.permutation(n)
        labels = [int(p) + 1 for p in perm]
        edges = sorted(
            (labels[u], labels[v]) for u in range(n) for v in children[u]
        )
        roots = tuple(sorted(labels[i] for i in range(r)))
        return CausalGraph(n=n, roots=roots, edges=tuple(edges), seed=seed)
    raise RuntimeError(f"could not generate a valid graph in {max_attempts} attempts")


def gen_relation_graph(gc: CausalGraph, rng: np.random.Generator) -> RelationGraph:
    """Assign an event type to every event and mirror causal edges as
    type edges.

    Events are visited in a deterministic topological order. For each
    event the open position interval between its ancestors' highest type
    and its typed descendants' lowest type either yields a uniformly
    sampled existing type or, when empty, a fresh type inserted right
    after the ancestor bound.
    """
    order = _topological_order(gc.vertices(), gc.children_of)
    reach = Reachability(gc.vertices(), gc.children_of)
    type_list: list[int] = []
    next_id = 0
    type_of: dict[int, int] = {}
    pos: dict[int, int] = {}

    def reindex() -> None:
        pos.clear()
        pos.update({t: i for i, t in enumerate(type_list)})

    for v in order:
        alpha = -1
        for a in reach.ancestors(v):
            if a in type_of:
                alpha = max(alpha, pos[type_of[a]])
        beta = len(type_list)
        for d in reach.descendants(v):
            if d in type_of:
                beta = min(beta, pos[type_of[d]])
        lo, hi = alpha + 1, beta - 1
        if hi >= lo:
            w = type_list[lo + int(rng.integers(hi - lo + 1))]
        else:
            w = next_id
            next_id += 1
            type_list.insert(alpha + 1, w)
            reindex()
        type_of[v] = w

    type_edges = sorted({(type_of[u], type_of[v]) for u, v in gc.edges})
    return RelationGraph(
        types=tuple(type_list), type_of=type_of, edges=tuple(type_edges)
    )


def graphs_to_dict(gc: CausalGraph, gn: RelationGraph) -> dict:
    return {
        "n": gc.n,
        "seed": gc.seed,
        "roots": list(gc.roots),
        "edges": [list(e) for e in gc.edges],
        "types": list(gn.types),
        "type_of": {str(v): t for v, t in sorted(gn.type_of.items())},
    }


def graphs_from_dict(d: dict) -> tuple[CausalGraph, RelationGraph]:
    try:
        gc = CausalGraph(
            n=int(d["n"]),
            roots=tuple(int(x) for x in d["roots"]),
            edges=tuple((int(u), int(v)) for u, v in d["edges"]),
            seed=d.get("seed"),
        )
        type_of = {int(v): int(t) for v, t in d["type_of"].items()}
        types = tuple(int(t) for t in d["types"])
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"malformed graph file: {e}") from e
    # type edges mirror causal edges, so they are reconstructed
    type_edges = sorted({(type_of[u], type_of[v]) for u, v in gc.edges})
    gn = RelationGraph(types=types, type_of=type_of, edges=tuple(type_edges))
    return gc, gn


def save_graphs(path: str | Path, gc: CausalGraph, gn: RelationGraph, meta: dict | None = None) -> None:
    d = graphs_to_dict(gc, gn)
    if meta:
        d["provenance"] = meta
    atomic_write_text(path, canonical_json(d, indent=2) + "\n")


def load_graphs(path: str | Path) -> tuple[CausalGraph, RelationGraph]:
    import json

    try:
        with open(path, "r", encoding="utf-8") as f:
            d = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read graph file {path}: {e}") from e
    return graphs_from_dict(d)


def check_graph_invariants(gc: CausalGraph, gn: RelationGraph | None = None) -> list[str]:
    """Return a list of invariant violations (empty when all hold)."""
    problems: list[str] = []
    try:
        _topological_order(gc.vertices(), gc.children_of)
    except DataError:
        problems.append("causal graph is cyclic")
        return problems
    reach = Reachability(gc.vertices(), gc.children_of)
    for root in gc.roots:
        if gc.parent_map[root]:
            problems.append(f"root {root} has a parent")
        if not gc.children_map[root]:
            problems.append(f"root {root} has no child")
    for v in gc.vertices():
        if v not in gc.roots and not gc.parent_map[v]:
            problems.append(f"non-root {v} has no parent")
    if len(gc.roots) >= 2:
        for v in gc.vertices():
            if all(reach.is_ancestor(r, v) for r in gc.roots):
                problems.append(f"vertex {v} descends from every root")
    if gn is not None:
        for v in gc.vertices():
            for a in reach.ancestors(v):
                if gn.type_index(a) >= gn.type_index(v):
                    problems.append(
                        f"ancestor {a} of {v} lacks a strictly smaller type index"
                    )
        for u in gc.vertices():
            for v in gc.vertices():
                if u < v and gn.co_occur(u, v) and not reach.unrelated(u, v):
                    problems.append(f"same-type events {u},{v} are causally related")
        mirrored = {(gn.type_of[u], gn.type_of[v]) for u, v in gc.edges}
        if mirrored != set(gn.edges):
            problems.append("type edges do not mirror causal edges")
    return problems
