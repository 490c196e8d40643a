"""Random packing graphs and fractional states for tests and experiments."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .containers import Container, ContainerPattern, Entry, PackingState, mult_in_x
from .packgraph import PackingGraph


def random_graph(rng, max_left: int = 8, max_right: int = 8, den: int = 12,
                 max_mult: int = 4, exact: bool = True) -> PackingGraph:
    """Packing graph with lattice sizes and rational right multiplicities."""
    L = int(rng.integers(0, max_left + 1))
    R = int(rng.integers(0, max_right + 1))
    ls = tuple(Fraction(int(v), den) for v in rng.integers(1, den + 1, size=L))
    rs = tuple(Fraction(int(v), den) for v in rng.integers(1, den + 1, size=R))
    lm = tuple(int(v) for v in rng.integers(0, max_mult + 1, size=L))
    if exact:
        rm = tuple(Fraction(int(a), int(b)) for a, b in
                   zip(rng.integers(0, 2 * max_mult + 1, size=R), rng.integers(1, 5, size=R)))
    else:
        rm = tuple(float(v) for v in rng.uniform(0, max_mult, size=R))
    return PackingGraph(ls, lm, rs, rm)


def random_sizes(rng, n: int, lo: Fraction, hi: Fraction, den: int) -> tuple[Fraction, ...]:
    a, b = int(lo * den), int(hi * den)
    picks = rng.choice(np.arange(max(a, 1), b + 1), size=min(n, b - max(a, 1) + 1), replace=False)
    return tuple(sorted((Fraction(int(p), den) for p in picks), reverse=True))


def random_state(rng, *, n_types: int = 6, n_patterns: int = 8, den: int = 240,
                 lo: Fraction = Fraction(1, 64), hi: Fraction = Fraction(1, 2),
                 max_parts: int = 3, n_containers: int = 10, fractional: bool = True,
                 slack: int = 1) -> PackingState:
    """A state with random containers, patterns filled to capacity and noisy y, b.

    Pattern weights are in (0, 1) when ``fractional``, otherwise in (0, 3).
    ``y`` and ``b`` are the multiplicities implied by x and y, perturbed by up
    to ``slack`` per entry, so deficiencies are small but usually non-zero.
    """
    sizes = random_sizes(rng, n_types, lo, hi, den)
    n = len(sizes)
    pool = []
    seen = set()
    for _ in range(4 * n_containers):
        if len(pool) >= n_containers:
            break
        parts = int(rng.integers(1, max_parts + 1))
        counts: dict = {}
        for _ in range(parts):
            i = int(rng.integers(0, n))
            counts[i] = counts.get(i, 0) + 1
        if sum(sizes[i] * c for i, c in counts.items()) > 1:
            continue
        C = Container.make(counts, sizes)
        if C not in seen:
            seen.add(C)
            pool.append(C)
    x = []
    for j in range(n_patterns):
        counts: dict = {}
        cap = Fraction(1)
        order = list(rng.permutation(len(pool)))
        for k in order:
            C = pool[k]
            fit = int(cap // C.size)
            if fit == 0:
                continue
            c = int(rng.integers(0, fit + 1))
            if c:
                counts[C] = counts.get(C, 0) + c
                cap -= c * C.size
        if not counts:
            C = min(pool, key=lambda C: C.size)
            counts[C] = 1
        val = float(rng.uniform(0.05, 0.95)) if fractional else float(rng.uniform(0.05, 3.0))
        x.append(Entry(ContainerPattern.make(counts), val, j))
    y = {}
    for C in pool:
        m = mult_in_x(C, x)
        v = int(np.floor(m)) + int(rng.integers(-slack, slack + 1)) if m > 0 else 0
        if v > 0:
            y[C] = v
    b = [0] * n
    for C, v in y.items():
        for i, c in C.counts:
            b[i] += v * c
    b = [max(0, v + int(rng.integers(-slack, slack + 1))) for v in b]
    return PackingState(sizes, b, y, x)


def small_heavy_state(rng, *, n_patterns: int = 60, level: int = 6, n_types: int = 6,
                      den: int | None = None) -> PackingState:
    """Fractional state whose patterns hold many copies of tiny containers.

    Container sizes sit in the class (2^-(level+1), 2^-level] and below, so
    grouping and gluing both have work to do.
    """
    den = den or 2 ** (level + 4)
    lo = Fraction(1, 2 ** (level + 3))
    hi = Fraction(1, 2 ** level)
    return random_state(rng, n_types=n_types, n_patterns=n_patterns, den=den, lo=lo, hi=hi,
                        max_parts=2, n_containers=2 * n_types)


def random_constraints(rng, N: int, budget_frac: float = 1 / 32, p_exact: float = 0.15,
                       lam_max: float = 6.0) -> list[tuple[np.ndarray, float]]:
    """All-ones exact row plus random sparse Gaussian rows until the budget would pass N * budget_frac."""
    cons = [(np.ones(N), 0.0)]
    budget = 1.0
    while True:
        lam = 0.0 if rng.random() < p_exact else float(rng.uniform(0, lam_max))
        cost = float(np.exp(-lam * lam / 16))
        if budget + cost > N * budget_frac:
            return cons
        budget += cost
        v = rng.normal(size=N) * (rng.random(N) < rng.uniform(0.1, 1))
        cons.append((v, lam))
