"""Containers, container patterns and the (x, y, b) packing state.

A container is a multiset of items that fits in a bin; a container pattern is
a multiset of containers that fits in a bin.  The state keeps a list of pattern
entries with real weights ``x`` (identical patterns may sit in separate
entries), an integral container inventory ``y`` and the item demand ``b``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .packgraph import build_g1, build_g2, greedy_assignment, red_left_fractional

INT_TOL = 1e-9


class StateError(ValueError):
    pass


@dataclass(frozen=True)
class Container:
    counts: tuple[tuple[int, int], ...]
    size: Fraction

    @classmethod
    def make(cls, counts, sizes: Sequence[Fraction]) -> "Container":
        items = counts.items() if hasattr(counts, "items") else counts
        merged: dict[int, int] = {}
        for i, c in items:
            if c:
                merged[int(i)] = merged.get(int(i), 0) + int(c)
        canon = tuple(sorted(merged.items()))
        if any(c < 0 for _, c in canon):
            raise StateError("negative count in container")
        size = sum((sizes[i] * c for i, c in canon), Fraction(0))
        if size > 1:
            raise StateError(f"container of size {size} does not fit in a bin")
        return _intern(cls(canon, size))

    @classmethod
    def singleton(cls, i: int, sizes: Sequence[Fraction]) -> "Container":
        return cls.make({i: 1}, sizes)

    @property
    def sort_key(self):
        # largest first, then canonical counts
        return (-self.size, self.counts)

    def get(self, i: int) -> int:
        for j, c in self.counts:
            if j == i:
                return c
        return 0

    def scaled(self, k: int, sizes) -> "Container":
        return Container.make({i: c * k for i, c in self.counts}, sizes)

    def __add__(self, other: "Container") -> "Container":
        merged = dict(self.counts)
        for i, c in other.counts:
            merged[i] = merged.get(i, 0) + c
        canon = tuple(sorted(merged.items()))
        size = self.size + other.size
        if size > 1:
            raise StateError(f"container of size {size} does not fit in a bin")
        return _intern(Container(canon, size))

    def __repr__(self):
        body = ",".join(f"{i}:{c}" for i, c in self.counts)
        return f"C[{body}]"


_INTERN: dict = {}


def _intern(c: Container) -> Container:
    return _INTERN.setdefault(c, c)


@dataclass(frozen=True)
class ContainerPattern:
    counts: tuple[tuple[Container, int], ...]
    size: Fraction

    @classmethod
    def make(cls, counts) -> "ContainerPattern":
        items = counts.items() if hasattr(counts, "items") else counts
        merged: dict[Container, int] = {}
        for C, c in items:
            if c:
                merged[C] = merged.get(C, 0) + int(c)
        canon = tuple(sorted(merged.items(), key=lambda t: t[0].sort_key))
        size = sum((C.size * c for C, c in canon), Fraction(0))
        if size > 1:
            raise StateError(f"pattern of size {size} does not fit in a bin")
        return cls(canon, size)

    def get(self, C: Container) -> int:
        for D, c in self.counts:
            if D == C:
                return c
        return 0

    def as_dict(self) -> dict:
        return dict(self.counts)

    def item_counts(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for C, c in self.counts:
            for i, k in C.counts:
                out[i] = out.get(i, 0) + k * c
        return out


@dataclass
class Entry:
    pattern: ContainerPattern
    value: float
    eid: int


@dataclass
class PackingState:
    sizes: tuple[Fraction, ...]
    b: list[int]
    y: dict = field(default_factory=dict)
    x: list[Entry] = field(default_factory=list)

    def copy(self) -> "PackingState":
        return PackingState(self.sizes, list(self.b), dict(self.y),
                            [Entry(e.pattern, e.value, e.eid) for e in self.x])

    @property
    def objective(self) -> float:
        return float(sum(e.value for e in self.x))

    def support(self) -> list[Entry]:
        return [e for e in self.x if e.value > INT_TOL]

    def frac(self) -> list[Entry]:
        return [e for e in self.x if _fractional(e.value)]

    def is_integral(self) -> bool:
        return not self.frac()

    def containers(self) -> list[Container]:
        """Containers used by some pattern in the support, largest first."""
        seen = {C for e in self.x if e.value > 0 for C, _ in e.pattern.counts}
        return sorted(seen, key=lambda C: C.sort_key)

    def next_eid(self) -> int:
        return max((e.eid for e in self.x), default=-1) + 1

    def x_pairs(self) -> list[tuple[ContainerPattern, float]]:
        return [(e.pattern, e.value) for e in self.x]

    def validate(self):
        for C, yc in self.y.items():
            if yc < 0 or int(yc) != yc:
                raise StateError(f"y[{C}] = {yc} is not a non-negative integer")
        for e in self.x:
            if e.value < -INT_TOL:
                raise StateError(f"negative pattern weight {e.value}")
            if e.pattern.size > 1:
                raise StateError("infeasible pattern")
        if any(v < 0 for v in self.b):
            raise StateError("negative demand")


def _fractional(v: float) -> bool:
    return abs(v - round(v)) > INT_TOL


def size_class(size: Fraction) -> int:
    """Index l of the class (2^-(l+1), 2^-l] that contains ``size``."""
    size = Fraction(size)
    if not 0 < size <= 1:
        raise StateError(f"size {size} outside (0, 1]")
    return (size.denominator // size.numerator).bit_length() - 1


def class_sigma(level: int) -> Fraction:
    return Fraction(1, 2**level)


# -- starting solution -------------------------------------------------------------

def starting_state(instance, lp) -> PackingState:
    """Singleton containers for every item type; LP columns become container patterns."""
    sizes = instance.sizes
    singles = [Container.singleton(i, sizes) for i in range(instance.n)]
    y = {singles[i]: int(m) for i, m in enumerate(instance.mult)}
    x = []
    for j, (col, val) in enumerate(zip(lp.columns, lp.values)):
        pat = ContainerPattern.make({singles[i]: c for i, c in col.counts})
        x.append(Entry(pat, float(val), j))
    return PackingState(tuple(sizes), list(instance.mult), y, x)


# -- multiplicities and deficiency --------------------------------------------------

def mult_in_x(C: Container, x) -> float:
    pairs = x.x_pairs() if isinstance(x, PackingState) else _pairs(x)
    return sum(v * p.get(C) for p, v in pairs)


def _pairs(x):
    out = []
    for e in x:
        out.append((e.pattern, e.value) if isinstance(e, Entry) else e)
    return out


def g1(state: PackingState):
    return build_g1(state.sizes, state.b, state.y)


def g2(state: PackingState):
    return build_g2(state.x_pairs(), state.y)


def deficiency_parts(state: PackingState) -> tuple[float, float]:
    return float(greedy_assignment(g1(state))[1]), float(greedy_assignment(g2(state))[1])


def deficiency(state: PackingState) -> float:
    d1, d2 = deficiency_parts(state)
    return d1 + d2


# -- integral / fractional split ------------------------------------------------

def split_integral(state: PackingState) -> tuple[PackingState, PackingState]:
    """Split off floor(x) together with the containers and items it can absorb.

    The integral part gets x_hat = floor(x), the containers the red-first
    greedy sends to its slots (y_hat) and the items that greedy on G1 sends to
    y_hat's slots (b_hat).  It has deficiency 0; the remainder keeps the
    deficiency of the input.
    """
    floors = [math.floor(e.value + INT_TOL) for e in state.x]
    # G2 with red = integral part of each slot
    g = g2(state)
    red = []
    for (C, j), m in zip(g.right_keys, g.right_mult):
        red.append(min(floors[j] * state.x[j].pattern.get(C), m))
    share = red_left_fractional(g, red)
    y_hat = {C: int(round(s)) for C, s in zip(g.left_keys, share) if round(s) > 0}
    # G1: slots of y_hat first
    gg = g1(state)
    red1 = []
    for (i, C), m in zip(gg.right_keys, gg.right_mult):
        red1.append(y_hat.get(C, 0) * C.get(i))
    share1 = red_left_fractional(gg, red1)
    b_hat = [int(round(s)) for s in share1]

    xi, xf = [], []
    for e, f in zip(state.x, floors):
        if f > 0:
            xi.append(Entry(e.pattern, float(f), e.eid))
        rest = e.value - f
        if rest > INT_TOL:
            xf.append(Entry(e.pattern, rest, e.eid))
    y_rest = {C: yc - y_hat.get(C, 0) for C, yc in state.y.items() if yc - y_hat.get(C, 0) > 0}
    b_rest = [bi - bh for bi, bh in zip(state.b, b_hat)]
    return (PackingState(state.sizes, b_hat, y_hat, xi),
            PackingState(state.sizes, b_rest, y_rest, xf))


def recombine(a: PackingState, b: PackingState) -> PackingState:
    """Sum of two states.  Entries with the same id and pattern are merged."""
    y = dict(a.y)
    for C, c in b.y.items():
        y[C] = y.get(C, 0) + c
    y = {C: c for C, c in y.items() if c > 0}
    x: list[Entry] = [Entry(e.pattern, e.value, e.eid) for e in a.x]
    where = {(e.eid, e.pattern): k for k, e in enumerate(x)}
    for e in b.x:
        k = where.get((e.eid, e.pattern))
        if k is None:
            x.append(Entry(e.pattern, e.value, e.eid))
        else:
            x[k].value += e.value
    x.sort(key=lambda e: e.eid)
    return PackingState(a.sizes, [u + v for u, v in zip(a.b, b.b)], y, x)


# -- dominance -------------------------------------------------------------------

def prefix_at(weights: dict, s) -> float:
    return float(sum(w for C, w in weights.items() if C.size >= s))


def container_mults(x) -> dict:
    out: dict = {}
    for p, v in _pairs(x.x if isinstance(x, PackingState) else x):
        for C, c in p.counts:
            out[C] = out.get(C, 0.0) + v * c
    return out


def y_preceq(y_new: dict, y_old: dict) -> bool:
    """Every size-prefix of y_new holds at most as many containers as y_old."""
    points = {C.size for C in y_new} | {C.size for C in y_old}
    return all(prefix_at(y_new, s) <= prefix_at(y_old, s) + INT_TOL for s in points)


def x_succeq(x_new, x_old, tol: float = INT_TOL) -> bool:
    """Every size-prefix of x_new covers at least as many slots as x_old."""
    m_new, m_old = container_mults(x_new), container_mults(x_old)
    points = {C.size for C in m_new} | {C.size for C in m_old}
    return all(prefix_at(m_new, s) >= prefix_at(m_old, s) - tol for s in points)


# -- debug dump --------------------------------------------------------------------

def state_to_json(state: PackingState) -> str:
    containers = sorted(set(state.y) | {C for e in state.x for C, _ in e.pattern.counts},
                        key=lambda C: C.sort_key)
    cid = {C: k for k, C in enumerate(containers)}
    doc = {
        "sizes": [str(s) for s in state.sizes],
        "b": list(state.b),
        "containers": [{"id": cid[C], "items": [list(t) for t in C.counts], "size": str(C.size)}
                       for C in containers],
        "y": [[cid[C], c] for C, c in sorted(state.y.items(), key=lambda t: cid[t[0]])],
        "x": [{"eid": e.eid, "value": e.value,
               "pattern": [[cid[C], c] for C, c in e.pattern.counts]} for e in state.x],
    }
    return json.dumps(doc, sort_keys=True)


def state_from_json(text: str) -> PackingState:
    doc = json.loads(text)
    sizes = tuple(Fraction(s) for s in doc["sizes"])
    containers = {c["id"]: Container.make([tuple(t) for t in c["items"]], sizes) for c in doc["containers"]}
    y = {containers[k]: int(c) for k, c in doc["y"]}
    x = [Entry(ContainerPattern.make([(containers[k], c) for k, c in e["pattern"]]), float(e["value"]), int(e["eid"]))
         for e in doc["x"]]
    return PackingState(sizes, list(doc["b"]), y, x)
