"""Independent brute-force oracles the tests check library code against."""

import numpy as np


def matrix_closure(n: int, edges) -> np.ndarray:
    """closure[u-1, v-1] is True when a directed path u -> v exists,
    computed by boolean matrix powers."""
    adj = np.zeros((n, n), dtype=bool)
    for u, v in edges:
        adj[u - 1, v - 1] = True
    closure = adj.copy()
    while True:
        nxt = closure | (closure @ adj)
        if (nxt == closure).all():
            return closure
        closure = nxt


def path_exists(closure: np.ndarray, u: int, v: int) -> bool:
    return bool(closure[u - 1, v - 1])


def bfs_distance(edges, u: int, v: int):
    """Shortest directed path length by plain BFS over an edge list."""
    children = {}
    for a, b in edges:
        children.setdefault(a, []).append(b)
    if u == v:
        return 0
    frontier = [u]
    seen = {u}
    d = 0
    while frontier:
        d += 1
        nxt = []
        for w in frontier:
            for c in children.get(w, ()):
                if c == v:
                    return d
                if c not in seen:
                    seen.add(c)
                    nxt.append(c)
        frontier = nxt
    return None
