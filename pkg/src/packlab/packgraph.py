"""Size-threshold packing graphs and their deficiency.

A packing graph has left nodes (things to be packed) and right nodes (slots).
There is an edge u -> v exactly when ``size(u) <= size(v)``, so the graph is
stored as two node lists and the edges stay implicit.  Left multiplicities are
integers; right multiplicities may be any non-negative number.  Arithmetic is
done in whatever number type the multiplicities carry, so graphs built from
:class:`~fractions.Fraction` data produce exact deficiencies.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

INT_TOL = 1e-9


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class PackingGraph:
    left_sizes: tuple
    left_mult: tuple
    right_sizes: tuple
    right_mult: tuple
    left_keys: tuple = None
    right_keys: tuple = None

    def __post_init__(self):
        if len(self.left_sizes) != len(self.left_mult) or len(self.right_sizes) != len(self.right_mult):
            raise GraphError("size and multiplicity lists differ in length")
        for m in self.left_mult:
            if m < 0 or int(m) != m:
                raise GraphError(f"left multiplicity {m} is not a non-negative integer")
        for m in self.right_mult:
            if m < 0:
                raise GraphError(f"negative right multiplicity {m}")
        for s in (*self.left_sizes, *self.right_sizes):
            if not 0 <= s <= 1:
                raise GraphError(f"node size {s} outside [0, 1]")
        if self.left_keys is None:
            object.__setattr__(self, "left_keys", tuple(range(len(self.left_sizes))))
        if self.right_keys is None:
            object.__setattr__(self, "right_keys", tuple(range(len(self.right_sizes))))

    @property
    def n_left(self) -> int:
        return len(self.left_sizes)

    @property
    def n_right(self) -> int:
        return len(self.right_sizes)

    def left_total(self):
        return sum((s * m for s, m in zip(self.left_sizes, self.left_mult)), Fraction(0))

    def with_mult(self, left_mult=None, right_mult=None) -> "PackingGraph":
        return PackingGraph(self.left_sizes, tuple(self.left_mult if left_mult is None else left_mult),
                            self.right_sizes, tuple(self.right_mult if right_mult is None else right_mult),
                            self.left_keys, self.right_keys)


@dataclass
class Assignment:
    flows: dict = field(default_factory=dict)  # (left index, right index) -> amount
    left_used: list = field(default_factory=list)
    unpacked_left_size: object = 0

    def right_used(self, n_right: int) -> list:
        used = [0] * n_right
        for (_, v), a in self.flows.items():
            used[v] += a
        return used


def default_right_order(g: PackingGraph) -> list[int]:
    """Right nodes by decreasing size, ties by construction index."""
    return sorted(range(g.n_right), key=lambda v: (-g.right_sizes[v], v))


def greedy_assignment(g: PackingGraph, order: Sequence[int] | None = None):
    """Optimal assignment by the largest-fitting-left-node rule.

    Right nodes are visited in ``order`` (default: size-descending).  Each one
    takes flow from the largest left node that still has capacity and is no
    larger than it, until it is full or no such node remains.  Returns the
    assignment and its deficiency, the total size left unpacked.
    """
    if order is None:
        order = default_right_order(g)
    # left nodes by decreasing size, ties by lowest index
    lorder = sorted(range(g.n_left), key=lambda u: (-g.left_sizes[u], u))
    neg_sizes = [-g.left_sizes[u] for u in lorder]
    remaining = [g.left_mult[u] for u in lorder]
    # nxt[j]: first position >= j whose node still has capacity (path-compressed)
    nxt = list(range(len(lorder) + 1))

    def find(j):
        root = j
        while nxt[root] != root:
            root = nxt[root]
        while nxt[j] != root:
            nxt[j], j = root, nxt[j]
        return root

    for j, r in enumerate(remaining):
        if r <= 0:
            nxt[j] = j + 1

    flows = {}
    for v in order:
        cap = g.right_mult[v]
        if cap <= 0:
            continue
        j = find(bisect.bisect_left(neg_sizes, -g.right_sizes[v]))
        while cap > 0 and j < len(lorder):
            a = min(cap, remaining[j])
            u = lorder[j]
            flows[(u, v)] = flows.get((u, v), 0) + a
            remaining[j] -= a
            cap -= a
            if remaining[j] <= INT_TOL * (1 if isinstance(remaining[j], float) else 0):
                remaining[j] = 0
                nxt[j] = j + 1
                j = find(j)
    used = [0] * g.n_left
    left_rem = [0] * g.n_left
    for j, u in enumerate(lorder):
        left_rem[u] = remaining[j]
        used[u] = g.left_mult[u] - remaining[j]
    deficiency = sum((g.left_sizes[u] * left_rem[u] for u in range(g.n_left)), Fraction(0))
    return Assignment(flows, used, deficiency), deficiency


def deficiency_of(g: PackingGraph) -> float:
    return float(greedy_assignment(g)[1])


# -- the two graphs of the 2-stage packing ---------------------------------------

def build_g1(sizes: Sequence[Fraction], b: Sequence[int], y) -> PackingGraph:
    """Items -> container slots.

    ``y`` maps containers (objects with ``counts`` as (item, count) pairs) to
    integral multiplicities.  Right node ``(i, C)`` has size ``s_i`` and
    multiplicity ``y_C * C_i``.
    """
    rs, rm, rk = [], [], []
    for C, yc in _items(y):
        if yc != int(yc):
            raise GraphError("container multiplicities must be integral")
        if yc <= 0:
            continue
        for i, c in C.counts:
            rs.append(sizes[i])
            rm.append(int(yc) * c)
            rk.append((i, C))
    return PackingGraph(tuple(sizes), tuple(int(m) for m in b), tuple(rs), tuple(rm),
                        tuple(range(len(sizes))), tuple(rk))


def build_g2(x, y) -> PackingGraph:
    """Containers -> pattern slots.

    ``x`` is a sequence of (pattern, value) pairs, where a pattern has
    ``counts`` as (container, count) pairs; entries are kept separate even if
    two patterns coincide.  ``y`` maps containers to integral multiplicities.
    Right node ``(C, j)`` (container ``C`` in the ``j``-th pattern entry) has
    size ``s(C)`` and multiplicity ``x_j * p_C``.
    """
    left = sorted(((C, yc) for C, yc in _items(y) if yc > 0), key=lambda t: t[0].sort_key)
    for _, yc in left:
        if yc != int(yc):
            raise GraphError("container multiplicities must be integral")
    rs, rm, rk = [], [], []
    for j, (p, xv) in enumerate(x):
        for C, c in p.counts:
            rs.append(C.size)
            rm.append(xv * c)
            rk.append((C, j))
    return PackingGraph(tuple(C.size for C, _ in left), tuple(int(yc) for _, yc in left),
                        tuple(rs), tuple(rm), tuple(C for C, _ in left), tuple(rk))


def _items(y):
    return y.items() if hasattr(y, "items") else y


# -- red/blue decomposition ------------------------------------------------------

def _floor(r):
    if isinstance(r, float):
        return math.floor(r + INT_TOL)
    return math.floor(r)


def red_left_fractional(g: PackingGraph, red: Sequence) -> list:
    """Red share of every left node when red copies are served first.

    Each right node is split into a red copy (``red[v]``) and a blue copy
    (the rest); the greedy visits red copies before blue ones, both
    size-descending.  The red share of a left node is the flow it sends to
    red copies.  With these shares the red graph has deficiency 0 and the
    blue graph keeps the deficiency of ``g``.
    """
    n = g.n_right
    blue = [m - r for m, r in zip(g.right_mult, red)]
    doubled = PackingGraph(g.left_sizes, g.left_mult, g.right_sizes * 2, tuple(red) + tuple(blue))
    order = [v for v in default_right_order(g)] + [n + v for v in default_right_order(g)]
    a, _ = greedy_assignment(doubled, order)
    share = [0] * g.n_left
    for (u, v), f in a.flows.items():
        if v < n:
            share[u] += f
    return share


def integralize_red(g: PackingGraph, share: Sequence) -> list[int]:
    """Round fractional red left shares to integers by carrying down in size.

    Visiting left nodes with positive share from largest to smallest, each
    node keeps the integer part of (share + carry) and passes the fractional
    rest to the next smaller node; whatever is left after the last node is
    dropped.  A node never gets more than its multiplicity.
    """
    idx = sorted((u for u in range(g.n_left) if share[u] > 0), key=lambda u: (-g.left_sizes[u], u))
    red = [0] * g.n_left
    carry = 0
    for u in idx:
        r = share[u] + carry
        m = g.left_mult[u]
        if r > m:
            red[u], carry = m, r - m
        else:
            red[u] = _floor(r)
            carry = max(r - red[u], 0)
    return [int(v) for v in red]


def decompose_red_blue(g: PackingGraph, red_right: Sequence, sigma):
    """Split ``g`` into a red graph of deficiency 0 and a blue graph.

    ``red_right`` gives the red multiplicity of every right node (the blue
    one is the rest).  Right nodes larger than ``sigma`` must be all blue.
    Left multiplicities are split into integers so that
    def(red) = 0 and def(blue) <= def(g) + sigma.
    """
    if len(red_right) != g.n_right:
        raise GraphError("need one red multiplicity per right node")
    for v, (r, m, s) in enumerate(zip(red_right, g.right_mult, g.right_sizes)):
        if r < 0 or r > m + INT_TOL:
            raise GraphError(f"red multiplicity {r} of right node {v} outside [0, {m}]")
        if r > 0 and s > sigma:
            raise GraphError(f"right node {v} of size {s} > sigma carries red multiplicity")
    red_left = integralize_red(g, red_left_fractional(g, red_right))
    blue_left = [m - r for m, r in zip(g.left_mult, red_left)]
    blue_right = [max(m - r, 0) for m, r in zip(g.right_mult, red_right)]
    return g.with_mult(red_left, red_right), g.with_mult(blue_left, blue_right)
