"""End-to-end LP rounding: preprocessing, the iteration loop, materialization, verification."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .containers import (Entry, PackingState, deficiency, deficiency_parts, recombine,
                         split_integral, starting_state)
from .discrepancy import BudgetViolation, build_intervals, partial_color
from .instance import Instance, total_size
from .lp import solve_gg_lp
from .packgraph import build_g1, build_g2, greedy_assignment
from .params import SolveParams
from .rebuild import rebuild_all


class PipelineError(RuntimeError):
    def __init__(self, stage: str, msg: str, report: dict | None = None):
        super().__init__(f"[{stage}] {msg}")
        self.stage = stage
        self.report = report or {}


# -- solutions --------------------------------------------------------------------------

@dataclass
class BinSolution:
    bins: list                      # one {type index: count} per bin
    meta: dict = field(default_factory=dict)

    @property
    def bins_used(self) -> int:
        return len(self.bins)

    def to_json(self) -> str:
        bins = [[[int(t), int(c)] for t, c in sorted(b.items())] for b in self.bins]
        return json.dumps({"bins": bins, "meta": self.meta}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BinSolution":
        d = json.loads(text)
        return cls([{int(t): int(c) for t, c in b} for b in d["bins"]], d.get("meta", {}))


@dataclass
class VerifyReport:
    ok: bool
    violations: list

    @property
    def first(self) -> str | None:
        return self.violations[0] if self.violations else None


def verify(instance: Instance, sol: BinSolution) -> VerifyReport:
    """Exact check that every bin fits and every item is packed exactly once."""
    viol = []
    seen = [0] * instance.n
    for k, b in enumerate(sol.bins):
        load = Fraction(0)
        for t, c in b.items():
            if not 0 <= t < instance.n:
                viol.append(f"bin {k} has unknown type {t}")
                continue
            if c < 0:
                viol.append(f"bin {k} has negative count for type {t}")
            load += instance.sizes[t] * c
            seen[t] += c
        if load > 1:
            viol.append(f"bin {k} overfull {load}")
    for t, (got, want) in enumerate(zip(seen, instance.mult)):
        if got < want:
            viol.append(f"type {t} short by {want - got}")
        elif got > want:
            viol.append(f"type {t} over by {got - want}")
    return VerifyReport(not viol, viol)


# -- greedy packing ----------------------------------------------------------------------

def first_fit(weights, cap: int, bins_load: list | None = None) -> tuple[list[int], list[int]]:
    """Bin index for each weight under first fit; loads of all bins.

    ``bins_load`` lets the caller start from partly filled bins.
    """
    loads = list(bins_load or [])
    where = []
    for w in weights:
        for k, ld in enumerate(loads):
            if ld + w <= cap:
                loads[k] = ld + w
                where.append(k)
                break
        else:
            loads.append(w)
            where.append(len(loads) - 1)
    return where, loads


def greedy_pack(instance: Instance, order=None) -> BinSolution:
    """First fit over the items of ``instance`` (default order: largest first)."""
    items = instance.expanded() if order is None else list(order)
    D = instance.denominator()
    weights = [int(instance.sizes[t] * D) for t in items]
    where, loads = first_fit(weights, D)
    bins = [dict() for _ in loads]
    for t, k in zip(items, where):
        bins[k][t] = bins[k].get(t, 0) + 1
    return BinSolution(bins, {"algo": "greedy"})


# -- preprocessing -----------------------------------------------------------------------

@dataclass
class Preprocessed:
    large: Instance                 # rounded large items
    small: list                     # original type index of every small item, largest first
    pools: list                     # rounded type -> original type indices of its items
    threshold: Fraction
    U: Fraction


def preprocess(instance: Instance, params: SolveParams | None = None) -> Preprocessed:
    """Split at 1/U and geometrically group the large items.

    Large items, largest first, are cut into consecutive groups that close as
    soon as their total size reaches 2 (so each closed group weighs less than
    3); every item is rounded up to the largest size in its group.
    """
    U = total_size(instance)
    threshold = 1 / U if U > 0 else Fraction(1)
    large, small = [], []
    for t in instance.expanded():
        (large if instance.sizes[t] >= threshold else small).append(t)
    groups, cur, acc = [], [], Fraction(0)
    for t in large:
        cur.append(t)
        acc += instance.sizes[t]
        if acc >= 2:
            groups.append(cur)
            cur, acc = [], Fraction(0)
    if cur:
        groups.append(cur)
    by_size: dict[Fraction, list] = {}
    for g in groups:
        by_size.setdefault(instance.sizes[g[0]], []).extend(g)
    order = sorted(by_size, reverse=True)
    rounded = Instance(tuple(order), tuple(len(by_size[s]) for s in order), instance.name)
    return Preprocessed(rounded, small, [by_size[s] for s in order], threshold, U)


# -- one iteration -----------------------------------------------------------------------

@dataclass
class IterationRecord:
    index: int
    frac_before: int
    frac_after: int
    objective_before: float
    objective_after: float
    def_before: float
    def_after: float
    rebuild_bound: float
    budget: float
    N: int
    attempts: int
    delta_large: float
    budget_K: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def one_iteration(state: PackingState, params: SolveParams, rng, index: int = 0,
                  escalate: int = 6):
    """Split, rebuild, build intervals, walk, recombine.

    If the interval family breaks the walk's budget, delta_large and K are
    doubled (at most ``escalate`` times) and the rebuild is redone.  Returns
    ``(state, IterationRecord)``; raises :class:`PipelineError` when the
    budget cannot be met or the walk fails.
    """
    int_part, frac_part = split_integral(state)
    N = len(frac_part.x)
    d0 = deficiency(state)
    if N == 0:
        rec = IterationRecord(index, 0, 0, state.objective, state.objective, d0, d0, 0.0, 0.0, 0, 0,
                              float(params.delta_large), params.budget_K)
        return state.copy(), rec
    if N < 16:
        raise PipelineError("intervals", f"support {N} < 16: the objective row alone breaks the budget",
                            {"budget": 1.0, "N": N})
    p = params
    for _ in range(escalate + 1):
        rebuilt, M, log = rebuild_all(frac_part, p, measure=False)
        fam = build_intervals(M, p)
        if fam.budget <= N / 16:
            break
        p = p.with_(delta_large=p.delta_large * 2, budget_K=p.budget_K * 2)
    else:
        raise PipelineError("intervals", f"budget {fam.budget:.3g} > N/16 = {N / 16:.3g}",
                            {"budget": fam.budget, "N": N})
    try:
        walk = partial_color(M.x, fam.constraints(), p, rng)
    except BudgetViolation as exc:  # pragma: no cover - guarded above
        raise PipelineError("walk", str(exc)) from exc
    if not walk.success:
        raise PipelineError("walk", f"no partial coloring after {walk.attempts} attempts",
                            {"budget": fam.budget, "N": N})
    x_new = []
    for e, v in zip(rebuilt.x, walk.x):
        if v > 0:
            x_new.append(Entry(e.pattern, float(v), e.eid))
    new_frac = PackingState(rebuilt.sizes, list(rebuilt.b), dict(rebuilt.y), x_new)
    out = recombine(int_part, new_frac)
    rec = IterationRecord(index, len(state.frac()), len(out.frac()), state.objective, out.objective,
                          d0, deficiency(out), 0.0, fam.budget, N, walk.attempts,
                          float(p.delta_large), p.budget_K)
    rec.rebuild_bound = float(sum(s.bound for s in log.steps))
    return out, rec


# -- materialization -----------------------------------------------------------------------

def _materialize(state: PackingState, R: Instance):
    """Integral (x, y) over the rounded instance -> bins of rounded item types.

    Containers go to pattern slots by the greedy on G2, items go to container
    slots by the greedy on G1, everything unassigned is returned as leftover.
    """
    # one bin per unit of every pattern entry
    bins: list[list] = []                       # bin -> list of container copy ids
    slot_queue: dict = {}                       # (C, j) -> list of bin indices, one per slot
    for j, e in enumerate(state.x):
        v = int(round(e.value))
        for _ in range(v):
            k = len(bins)
            bins.append([])
            for C, c in e.pattern.counts:
                slot_queue.setdefault((C, j), []).extend([k] * c)
    g = build_g2(state.x_pairs(), state.y)
    asg, _ = greedy_assignment(g)
    copies: list = []                           # container copy -> (type, bin or None)
    placed_by_type: dict = {}
    pos = {key: 0 for key in slot_queue}
    for (u, r), a in sorted(asg.flows.items()):
        a = int(round(a))
        C_left, key = g.left_keys[u], g.right_keys[r]
        for _ in range(a):
            k = slot_queue[key][pos[key]]
            pos[key] += 1
            copies.append([C_left, k])
            bins[k].append(len(copies) - 1)
            placed_by_type[C_left] = placed_by_type.get(C_left, 0) + 1
    for C, yc in sorted(state.y.items(), key=lambda t: t[0].sort_key):
        for _ in range(int(yc) - placed_by_type.get(C, 0)):
            copies.append([C, None])
    # items into container slots
    by_type: dict = {}
    for cid, (C, _) in enumerate(copies):
        by_type.setdefault(C, []).append(cid)
    gg = build_g1(state.sizes, state.b, state.y)
    asg1, _ = greedy_assignment(gg)
    contents = [dict() for _ in copies]
    slot_fill: dict = {}
    assigned = [0] * len(state.b)
    for (u, r), a in sorted(asg1.flows.items()):
        a = int(round(a))
        t = gg.left_keys[u]
        i, C = gg.right_keys[r]
        # slot node (i, C): C_i slots in each copy of C
        for _ in range(a):
            n_done = slot_fill.get((i, C), 0)
            cid = by_type[C][n_done // C.get(i)]
            slot_fill[(i, C)] = n_done + 1
            contents[cid][t] = contents[cid].get(t, 0) + 1
            assigned[t] += 1
    bin_items = []
    for members in bins:
        d: dict = {}
        for cid in members:
            for t, c in contents[cid].items():
                d[t] = d.get(t, 0) + c
        bin_items.append(d)
    loose_containers = [contents[cid] for cid, (_, k) in enumerate(copies) if k is None and contents[cid]]
    loose_items = [t for t in range(len(state.b)) for _ in range(state.b[t] - assigned[t])]
    return bin_items, loose_containers, loose_items


def _unround(bins: list, pools: list) -> list:
    """Replace rounded item types by original items, which are never larger."""
    ptr = [0] * len(pools)
    out = []
    for b in bins:
        d: dict = {}
        for r, c in sorted(b.items()):
            for _ in range(c):
                t = pools[r][ptr[r]]
                ptr[r] += 1
                d[t] = d.get(t, 0) + 1
        out.append(d)
    return out


def sprinkle_small(bins: list, small: list, instance: Instance) -> tuple[list, int]:
    """First fit the small items into the existing bins, opening bins only when needed.

    Returns the new bin list and the number of bins opened.
    """
    D = instance.denominator()
    w = [int(s * D) for s in instance.sizes]
    loads = [sum(w[t] * c for t, c in b.items()) for b in bins]
    before = len(loads)
    where, loads = first_fit([w[t] for t in small], D, loads)
    bins = [dict(b) for b in bins] + [dict() for _ in range(len(loads) - before)]
    for t, k in zip(small, where):
        bins[k][t] = bins[k].get(t, 0) + 1
    return bins, len(loads) - before


# -- driver -----------------------------------------------------------------------------

def solve_paper(instance: Instance, params: SolveParams | None = None, *,
                lp_value: float | None = None) -> BinSolution:
    """LP rounding with containers and partial colorings, then greedy clean-up.

    ``lp_value`` (the LP optimum of ``instance``) is only copied into the
    metadata; pass it when already known to avoid solving the LP twice.
    """
    params = params or SolveParams()
    rng = np.random.default_rng(params.rng_seed)
    pre = preprocess(instance, params)
    R = pre.large
    try:
        lp = solve_gg_lp(R)
    except Exception as exc:
        raise PipelineError("lp", str(exc)) from exc
    state = starting_state(R, lp)
    frac = len(state.frac())
    stop = math.ceil(params.frac_stop_c * math.log2(1 / R.s_min)) if R.n else 0
    support = params.support_L * math.log2(1 / R.s_min) if R.n else 0.0
    cap = math.ceil(math.log2(max(2, frac))) + 8
    records: list[IterationRecord] = []
    stop_reason = "threshold"
    while len(state.frac()) > stop:
        if len(records) >= cap:
            stop_reason = "iteration cap"
            break
        if len(state.frac()) < support:
            stop_reason = "support"
            break
        try:
            state, rec = one_iteration(state, params, rng, len(records))
        except PipelineError as exc:
            if exc.stage != "intervals":
                raise
            stop_reason = f"budget: {exc}"
            break
        records.append(rec)
    if not state.frac():
        stop_reason = "integral" if stop_reason == "threshold" else stop_reason
    objective = state.objective
    d1, d2 = deficiency_parts(state)
    bought = state.copy()
    for e in bought.x:
        e.value = float(math.ceil(e.value - 1e-9))
    bought.x = [e for e in bought.x if e.value > 0]
    d_final = sum(deficiency_parts(bought))

    bins_r, loose_c, loose_i = _materialize(bought, R)
    groups = _unround(bins_r + loose_c + [{t: 1} for t in loose_i], pre.pools)
    bins = [b for b in groups[:len(bins_r)] if b]
    n_pattern_bins = len(bins)
    D = instance.denominator()
    objs = groups[len(bins_r):]
    objs.sort(key=lambda d: -sum(instance.sizes[t] * c for t, c in d.items()))
    loads = [sum(int(instance.sizes[t] * D) * c for t, c in b.items()) for b in bins]
    where, loads = first_fit([sum(int(instance.sizes[t] * D) * c for t, c in o.items()) for o in objs], D, loads)
    bins += [dict() for _ in range(len(loads) - len(bins))]
    for o, k in zip(objs, where):
        for t, c in o.items():
            bins[k][t] = bins[k].get(t, 0) + c
    n_after_left = len(bins)
    bins, opened = sprinkle_small(bins, pre.small, instance)
    meta = {
        "algo": "paper",
        "seed": params.rng_seed,
        "params": params.as_dict(),
        "n_large_types": R.n,
        "n_small_items": len(pre.small),
        "lp_rounded": lp.objective,
        "opt_f": lp_value,
        "iterations": [r.as_dict() for r in records],
        "stop_reason": stop_reason,
        "frac_threshold": stop,
        "support_threshold": support,
        "frac_final": len(state.frac()),
        "objective_final": objective,
        "def_final": d1 + d2,
        "def_bought": d_final,
        "pattern_bins": n_pattern_bins,
        "leftover_bins": n_after_left - n_pattern_bins,
        "sprinkle_bins": opened,
    }
    sol = BinSolution(bins, meta)
    sol.meta["bins_used"] = sol.bins_used
    rep = verify(instance, sol)
    if not rep.ok:
        raise PipelineError("verify", rep.first, {"violations": rep.violations})
    return sol
