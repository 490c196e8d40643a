"""Gilmore-Gomory configuration LP solved by column generation.

The master is the covering LP ``min 1^T x, A x >= b, x >= 0`` over item
patterns; new columns come from an exact unbounded-knapsack DP on the
capacity lattice ``{0, 1/D, ..., 1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .instance import Instance, common_denominator, total_size
from .simplex import CoveringSimplex

MAX_LATTICE = 10**8
MAX_TABLE_CELLS = 6 * 10**7


class LpError(RuntimeError):
    pass


@dataclass(frozen=True, order=True)
class ItemPattern:
    """A bin configuration: sorted ``(item type, count)`` pairs, counts > 0."""

    counts: tuple[tuple[int, int], ...]

    @classmethod
    def from_mapping(cls, counts) -> "ItemPattern":
        items = counts.items() if hasattr(counts, "items") else enumerate(counts)
        return cls(tuple(sorted((int(i), int(c)) for i, c in items if c)))

    def as_dict(self) -> dict[int, int]:
        return dict(self.counts)

    def vector(self, n: int) -> np.ndarray:
        v = np.zeros(n)
        for i, c in self.counts:
            v[i] = c
        return v

    def size(self, sizes: Sequence[Fraction]) -> Fraction:
        return sum((sizes[i] * c for i, c in self.counts), Fraction(0))

    def is_feasible(self, sizes: Sequence[Fraction]) -> bool:
        return self.size(sizes) <= 1

    def __len__(self):
        return len(self.counts)


@dataclass
class LpSolution:
    columns: list[ItemPattern]
    values: list[float]
    objective: float
    duals: list[float]
    rounds: int = 0
    pivots: int = 0

    def coverage(self, n: int) -> np.ndarray:
        cov = np.zeros(n)
        for p, v in zip(self.columns, self.values):
            cov += v * p.vector(n)
        return cov


def _unbounded_item(prev: np.ndarray, w: int, v: float) -> np.ndarray:
    """Add unlimited copies of one item (weight w, value v) to a DP table.

    Along each residue class r mod w the recurrence
    ``T[r + j w] = max_{i <= j} prev[r + i w] + (j - i) v`` is a running max,
    so the whole update is one reshape and one cumulative maximum.
    """
    L = prev.shape[0]
    J = -(-L // w)
    padded = np.full(J * w, -np.inf)
    padded[:L] = prev
    grid = padded.reshape(J, w)
    shift = (np.arange(J) * v)[:, None]
    grid = np.maximum.accumulate(grid - shift, axis=0) + shift
    return grid.reshape(-1)[:L]


def price_pattern(sizes: Sequence[Fraction], duals: Sequence[float], D: int | None = None,
                  *, max_lattice: int = MAX_LATTICE) -> tuple[ItemPattern, float]:
    """Best pattern for the given item values: max sum(duals * p), sum(s * p) <= 1.

    Ties go to the lexicographically smallest count vector.
    """
    n = len(sizes)
    if D is None:
        D = common_denominator(sizes)
    if D > max_lattice:
        raise LpError(f"capacity lattice {D} exceeds guard {max_lattice}")
    duals = np.asarray(duals, dtype=float)
    if n and duals.min() < 0:
        raise LpError("pricing needs non-negative duals")
    weights = []
    for s in sizes:
        w = s * D
        if w.denominator != 1:
            raise LpError(f"size {s} is not on the lattice 1/{D}")
        weights.append(int(w))

    tables = _suffix_tables(weights, duals, D)
    if tables is None:
        return ItemPattern(()), 0.0
    pattern = _backtrack(tables, weights, duals, D, {})
    return pattern, float(sum(duals[i] * c for i, c in pattern.counts))


def _suffix_tables(weights, duals, D):
    active = [k for k in range(len(weights)) if duals[k] > 0]
    if not active:
        return None
    if len(active) * (D + 1) > MAX_TABLE_CELLS:
        raise LpError("pricing table too large for this lattice")
    # best[pos][c]: best value within capacity c using active items pos.. only
    best = [None] * (len(active) + 1)
    best[-1] = np.zeros(D + 1)
    for pos in range(len(active) - 1, -1, -1):
        k = active[pos]
        best[pos] = _unbounded_item(best[pos + 1], weights[k], duals[k])
    return active, best


def _backtrack(tables, weights, duals, cap, counts) -> ItemPattern:
    active, best = tables
    counts = dict(counts)
    for pos, k in enumerate(active):
        target = best[pos][cap]
        tol = 1e-12 * max(1.0, abs(target))
        w = weights[k]
        if w > cap or best[pos + 1][cap] >= target - tol:
            continue
        ms = np.arange(cap // w + 1)
        vals = ms * duals[k] + best[pos + 1][cap - ms * w]
        m = int(np.flatnonzero(vals >= target - tol)[0])
        if m:
            counts[k] = counts.get(k, 0) + m
            cap -= m * w
    return ItemPattern.from_mapping(counts)


def price_columns(weights: list[int], duals: np.ndarray, D: int, floor: float,
                  limit: int) -> tuple[list[ItemPattern], float]:
    """Improving columns from one DP: the best pattern, then for each item the
    best pattern forced to contain it.  Returns them with the best value.
    """
    tables = _suffix_tables(weights, duals, D)
    if tables is None:
        return [], 0.0
    full = tables[1][0]
    top = float(full[D])
    if top <= floor:
        return [], top
    cands = sorted(((duals[k] + full[D - weights[k]], k) for k in tables[0]
                    if weights[k] <= D and duals[k] + full[D - weights[k]] > floor),
                   key=lambda t: -t[0])
    out = [_backtrack(tables, weights, duals, D, {})]
    seen = set(out)
    for _, k in cands:
        if len(out) >= limit:
            break
        p = _backtrack(tables, weights, duals, D - weights[k], {k: 1})
        if p not in seen:
            seen.add(p)
            out.append(p)
    return out, top


def _greedy_columns(weights: list[int], duals: np.ndarray, D: int) -> list[dict[int, int]]:
    """Cheap pricing candidates: fill a bin greedily by value density and by value."""
    out = []
    pos = [k for k in range(len(weights)) if duals[k] > 0]
    for key in (lambda k: -duals[k] / weights[k], lambda k: -duals[k]):
        cap, counts = D, {}
        for k in sorted(pos, key=key):
            c = cap // weights[k]
            if c:
                counts[k] = c
                cap -= c * weights[k]
        out.append(counts)
    return out


def _ffd_patterns(instance: Instance) -> list[ItemPattern]:
    """Bins of first fit decreasing, used as extra starting columns."""
    loads, bins = [], []
    for i in instance.expanded():
        s = instance.sizes[i]
        for j, ld in enumerate(loads):
            if ld + s <= 1:
                loads[j] += s
                bins[j][i] = bins[j].get(i, 0) + 1
                break
        else:
            loads.append(s)
            bins.append({i: 1})
    return [ItemPattern.from_mapping(b) for b in bins]


def solve_gg_lp(instance: Instance, eps: float = 1e-9, *, max_rounds: int | None = None,
                rule: str = "auto", warm_start: bool = True, batch: int | None = None) -> LpSolution:
    """Column generation for the configuration LP of ``instance``.

    The initial basis is the singleton columns ``{i: floor(1/s_i)}``; with
    ``warm_start`` the bins of first fit decreasing are added as non-basic
    columns.  Each round tries two greedy fills and then the exact DP, which
    returns up to ``batch`` improving columns and decides termination: the
    loop stops once the best column has reduced cost above ``-eps``.  The
    returned solution is the final simplex basis, so it has at most ``n``
    positive entries.
    """
    n = instance.n
    if n == 0:
        return LpSolution([], [], 0.0, [])
    sizes = instance.sizes
    D = instance.denominator()
    if D > MAX_LATTICE:
        raise LpError(f"capacity lattice {D} exceeds guard {MAX_LATTICE}")
    if max_rounds is None:
        max_rounds = 10 * n * D
    if batch is None:
        batch = max(8, n // 4)

    master = CoveringSimplex(instance.mult, rule=rule)
    patterns: list[ItemPattern] = []
    known: set[ItemPattern] = set()

    def add(p):
        patterns.append(p)
        known.add(p)
        master.add_column(p.vector(n))

    for i, s in enumerate(sizes):
        add(ItemPattern(((i, math.floor(1 / s)),)))
    if warm_start:
        for p in _ffd_patterns(instance):
            if p not in known:
                add(p)
    basis = [n + i for i in range(n)]

    weights = [int(s * D) for s in sizes]
    rounds = 0
    while True:
        master.solve(basis)
        basis = None
        y = np.maximum(master.duals, 0.0)
        new = []
        for counts in _greedy_columns(weights, y, D):
            p = ItemPattern.from_mapping(counts)
            if sum(y[i] * c for i, c in p.counts) > 1 + eps and p not in known and p not in new:
                new.append(p)
        if not new:
            cols, top = price_columns(weights, y, D, 1 + eps, batch)
            new = [p for p in cols if p not in known]
            if not new:
                break
        rounds += 1
        if rounds > max_rounds:
            raise LpError(f"column generation did not converge in {max_rounds} rounds")
        for p in new:
            add(p)

    cols, vals = [], []
    for var, val in sorted(zip(master.basis, master.x_B)):
        if var < n or val <= 1e-12:
            continue
        r = round(val)
        if abs(val - r) < 1e-10:
            val = float(r)
        if val > 0:
            cols.append(patterns[var - n])
            vals.append(float(val))
    return LpSolution(cols, vals, float(sum(vals)), [float(v) for v in y], rounds, master.pivots)


def lp_lower_bound(instance: Instance) -> float:
    return float(total_size(instance))
