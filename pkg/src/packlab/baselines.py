"""Classical comparison algorithms: First Fit, First Fit Decreasing, Karmarkar-Karp rounding."""

from __future__ import annotations

import math

import numpy as np

from .instance import Instance
from .lp import solve_gg_lp
from .params import SolveParams
from .pipeline import BinSolution, first_fit as _ff, preprocess, sprinkle_small, verify


def first_fit(instance: Instance, order=None) -> BinSolution:
    """Each item goes into the first open bin with room.  ``order`` lists item types."""
    items = instance.expanded() if order is None else list(order)
    if sorted(items) != instance.expanded():
        raise ValueError("order must be a permutation of the expanded items")
    D = instance.denominator()
    where, loads = _ff([int(instance.sizes[t] * D) for t in items], D)
    bins = [dict() for _ in loads]
    for t, k in zip(items, where):
        bins[k][t] = bins[k].get(t, 0) + 1
    return BinSolution(bins, {"algo": "ff"})


def random_order(instance: Instance, seed: int) -> list[int]:
    items = instance.expanded()
    perm = np.random.default_rng(seed).permutation(len(items))
    return [items[k] for k in perm]


def first_fit_decreasing(instance: Instance) -> BinSolution:
    sol = first_fit(instance, instance.expanded())
    sol.meta["algo"] = "ffd"
    return sol


def karmarkar_karp(instance: Instance, params: SolveParams | None = None,
                   max_rounds: int = 64) -> BinSolution:
    """Iterative rounding: group, solve the LP, buy floor(x), repeat on what is left.

    Items below 1/U are set aside and sprinkled in at the end.  The loop stops
    once the residual weighs at most 1 or a round buys nothing; the residual
    is then packed by first fit decreasing.
    """
    pre = preprocess(instance, params)
    residual = sorted(t for pool in pre.pools for t in pool)   # original types, largest first
    bins: list[dict] = []
    rounds = []
    for _ in range(max_rounds):
        if not residual:
            break
        weight = sum(instance.sizes[t] for t in residual)
        if weight <= 1:
            break
        R, pools = _grouped(instance, residual)
        lp = solve_gg_lp(R)
        taken = [0] * R.n
        bought = 0
        for col, val in zip(lp.columns, lp.values):
            for _ in range(int(math.floor(val + 1e-9))):
                b: dict = {}
                for r, c in col.counts:
                    for _ in range(c):
                        if taken[r] < len(pools[r]):
                            t = pools[r][taken[r]]
                            taken[r] += 1
                            b[t] = b.get(t, 0) + 1
                if b:
                    bins.append(b)
                    bought += 1
        rounds.append({"types": R.n, "lp": lp.objective, "bought": bought})
        if not bought:
            break
        used = [t for r in range(R.n) for t in pools[r][:taken[r]]]
        left = {}
        for t in residual:
            left[t] = left.get(t, 0) + 1
        for t in used:
            left[t] -= 1
        residual = sorted(t for t, c in left.items() for _ in range(c))
    if residual:
        D = instance.denominator()
        where, loads = _ff([int(instance.sizes[t] * D) for t in residual], D)
        extra = [dict() for _ in loads]
        for t, k in zip(residual, where):
            extra[k][t] = extra[k].get(t, 0) + 1
        bins += extra
    bins, _ = sprinkle_small(bins, pre.small, instance)
    sol = BinSolution(bins, {"algo": "kk", "rounds": rounds})
    rep = verify(instance, sol)
    if not rep.ok:  # pragma: no cover - construction is exact
        raise RuntimeError(rep.first)
    return sol


def _grouped(instance: Instance, items: list[int]):
    """Geometric grouping of a multiset of original items (largest first)."""
    # map sub types back to original type indices through equal sizes
    index = {s: t for t, s in enumerate(instance.sizes)}
    counts: dict = {}
    for t in items:
        counts[t] = counts.get(t, 0) + 1
    sub = Instance.from_pairs([(instance.sizes[t], c) for t, c in sorted(counts.items())])
    pre = preprocess(sub)
    pools = [[index[sub.sizes[u]] for u in pool] for pool in pre.pools]
    # preprocess of a residual with U >= 1 may still set tiny items aside; fold them back in
    if pre.small:
        extra = [index[sub.sizes[u]] for u in pre.small]
        R = Instance.from_pairs([(s, m) for s, m in zip(pre.large.sizes, pre.large.mult)]
                                + [(instance.sizes[t], 1) for t in extra])
        by = {s: [] for s in R.sizes}
        for s, pool in zip(pre.large.sizes, pools):
            by[s].extend(pool)
        for t in extra:
            by[instance.sizes[t]].append(t)
        return R, [by[s] for s in R.sizes]
    return pre.large, pools
