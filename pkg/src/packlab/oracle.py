"""Brute-force references for the tests: full pattern LP, exact OPT, exact deficiency.

Everything here is exponential or close to it and refuses inputs above its
guard instead of returning a partial answer.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

from .instance import Instance
from .lp import ItemPattern
from .packgraph import PackingGraph
from .simplex import CoveringSimplex

MAX_TYPES = 8
MAX_PATTERNS = 10**6
MAX_ITEMS_OPT = 15
MAX_GRAPH_SIDE = 12


class OracleGuard(ValueError):
    pass


def enumerate_patterns(instance: Instance, limit: int = MAX_PATTERNS) -> list[ItemPattern]:
    """Every non-empty count vector with total size at most 1 (multiplicities ignored)."""
    n = instance.n
    if n > MAX_TYPES:
        raise OracleGuard(f"{n} item types exceed the enumeration guard {MAX_TYPES}")
    sizes = instance.sizes
    out: list[ItemPattern] = []
    counts = [0] * n

    def dfs(i, cap):
        if i == n:
            if any(counts):
                if len(out) >= limit:
                    raise OracleGuard(f"more than {limit} patterns")
                out.append(ItemPattern.from_mapping({k: c for k, c in enumerate(counts) if c}))
            return
        c = 0
        while c * sizes[i] <= cap:
            counts[i] = c
            dfs(i + 1, cap - c * sizes[i])
            c += 1
        counts[i] = 0

    dfs(0, Fraction(1))
    return out


def exact_lp(instance: Instance) -> float:
    """Configuration LP over all patterns, solved with the package simplex."""
    n = instance.n
    if n == 0:
        return 0.0
    pats = enumerate_patterns(instance)
    master = CoveringSimplex(instance.mult)
    index = {}
    for p in pats:
        index[p] = master.add_column(p.vector(n))
    basis = [index[ItemPattern(((i, int(1 // s)),))] for i, s in enumerate(instance.sizes)]
    xB, _ = master.solve(basis)
    return float(sum(v for var, v in zip(master.basis, xB) if var >= n))


def exact_opt(instance: Instance) -> int:
    """Minimum number of bins, by memoized search over residual multiplicities.

    Some bin holds the largest remaining item, and that bin can be assumed
    maximal, so only maximal patterns containing it are branched on.
    """
    if instance.total_items > MAX_ITEMS_OPT:
        raise OracleGuard(f"{instance.total_items} items exceed the exact OPT guard {MAX_ITEMS_OPT}")
    sizes = instance.sizes
    n = instance.n

    def maximal_fills(r, first):
        # all count vectors c <= r with c[first] >= 1 that leave no room for any remaining item
        counts = [0] * n
        counts[first] = 1
        found = []

        def dfs(i, cap):
            if i == n:
                if all(counts[k] == r[k] or sizes[k] > cap for k in range(n)):
                    found.append(tuple(counts))
                return
            lo = 1 if i == first else 0
            top = r[i]
            c = lo
            while c <= top and (c - lo) * sizes[i] <= cap:
                counts[i] = c
                dfs(i + 1, cap - (c - lo) * sizes[i])
                c += 1
            counts[i] = lo

        dfs(0, 1 - sizes[first])
        return found

    @lru_cache(maxsize=None)
    def f(r):
        if not any(r):
            return 0
        first = next(k for k in range(n) if r[k])
        return 1 + min(f(tuple(a - c for a, c in zip(r, p))) for p in maximal_fills(r, first))

    return f(tuple(instance.mult))


def exact_deficiency(g: PackingGraph) -> Fraction:
    """Minimum unassigned left size, by successive shortest paths on exact rationals.

    Source -> left u (capacity mult(u), cost -s(u)), u -> right v when
    s(u) <= s(v), right v -> sink (capacity mult(v)).  Augmenting along
    negative paths until none is left maximizes the packed size.
    """
    if g.n_left > MAX_GRAPH_SIDE or g.n_right > MAX_GRAPH_SIDE:
        raise OracleGuard(f"graph sides above {MAX_GRAPH_SIDE}")
    L, R = g.n_left, g.n_right
    ls = [Fraction(s) for s in g.left_sizes]
    rs = [Fraction(s) for s in g.right_sizes]
    S, T = L + R, L + R + 1
    # residual graph as adjacency lists of [to, cap, cost, rev]
    adj = [[] for _ in range(L + R + 2)]

    def arc(a, b, cap, cost):
        adj[a].append([b, cap, cost, len(adj[b])])
        adj[b].append([a, Fraction(0), -cost, len(adj[a]) - 1])

    for u in range(L):
        arc(S, u, Fraction(g.left_mult[u]), -ls[u])
        for v in range(R):
            if ls[u] <= rs[v]:
                arc(u, L + v, None, Fraction(0))
    for v in range(R):
        arc(L + v, T, Fraction(g.right_mult[v]), Fraction(0))

    def cap_of(e):
        return e[1]

    while True:
        # Bellman-Ford from S; uncapacitated middle arcs have cap None
        dist = [None] * len(adj)
        prev = [None] * len(adj)
        dist[S] = Fraction(0)
        for _ in range(len(adj)):
            moved = False
            for a in range(len(adj)):
                if dist[a] is None:
                    continue
                for k, e in enumerate(adj[a]):
                    if e[1] is not None and e[1] <= 0:
                        continue
                    d = dist[a] + e[2]
                    if dist[e[0]] is None or d < dist[e[0]]:
                        dist[e[0]] = d
                        prev[e[0]] = (a, k)
                        moved = True
            if not moved:
                break
        if dist[T] is None or dist[T] >= 0:
            break
        path, node = [], T
        while node != S:
            a, k = prev[node]
            path.append((a, k))
            node = a
        push = min(cap_of(adj[a][k]) for a, k in path if adj[a][k][1] is not None)
        for a, k in path:
            e = adj[a][k]
            if e[1] is not None:
                e[1] -= push
            back = adj[e[0]][e[3]]
            if back[1] is not None:
                back[1] += push
    packed = sum((-(e[2]) * (Fraction(g.left_mult[u]) - e[1])
                  for u in range(L) for e in adj[S] if e[0] == u), Fraction(0))
    return sum((ls[u] * g.left_mult[u] for u in range(L)), Fraction(0)) - packed
