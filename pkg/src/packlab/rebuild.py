"""Container rebuild: grouping, gluing and the per-class driver.

Everything here works on the fractional part of a state (all weights in
(0, 1)).  Pattern entries are rewritten in place, so the column set of the
incidence matrix never changes and 1^T x is conserved exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .containers import (Container, ContainerPattern, Entry, PackingState, class_sigma,
                         container_mults, deficiency, g2, size_class)
from .packgraph import decompose_red_blue

TOL = 1e-9


class RebuildError(ValueError):
    pass


@dataclass
class StepRecord:
    op: str
    level: int
    param: float
    def_before: float
    def_after: float
    bound: float
    detail: dict = field(default_factory=dict)

    @property
    def increase(self) -> float:
        return self.def_after - self.def_before

    def as_dict(self) -> dict:
        return {"op": self.op, "level": self.level, "param": self.param,
                "def_before": self.def_before, "def_after": self.def_after,
                "bound": self.bound, "detail": self.detail}


def _rewrite(state: PackingState, fn) -> PackingState:
    """Apply ``fn(pattern) -> counts`` to every entry."""
    x = [Entry(ContainerPattern.make(fn(e.pattern)), e.value, e.eid) for e in state.x]
    return PackingState(state.sizes, list(state.b), dict(state.y), x)


def class_members(state: PackingState, level: int) -> list[Container]:
    return [C for C in state.containers() if size_class(C.size) == level]


# -- grouping ----------------------------------------------------------------------

@dataclass
class GroupResult:
    groups: list          # (members, target) for every closed group
    deleted: list         # members of the final group

    def as_dict(self) -> dict:
        return {"groups": [{"members": [repr(C) for C in m], "target": repr(t)} for m, t in self.groups],
                "deleted": [repr(C) for C in self.deleted]}


def partition_scarce(state: PackingState, level: int, delta) -> GroupResult:
    """Greedy size-descending partition of the scarce containers of one class.

    A container is scarce when 0 < s(C) mult(C, x) < delta.  Groups are closed
    as soon as their weight reaches 2 delta; whatever is left over forms the
    final group.
    """
    delta = float(delta)
    mults = container_mults(state.x)
    scarce = [C for C in sorted(mults, key=lambda C: C.sort_key)
              if size_class(C.size) == level and 0 < float(C.size) * mults[C] < delta]
    groups, cur, acc = [], [], 0.0
    for C in scarce:
        cur.append(C)
        acc += float(C.size) * mults[C]
        if acc >= 2 * delta:
            groups.append((cur, cur[-1]))
            cur, acc = [], 0.0
    return GroupResult(groups, cur)


def group_size_class(state: PackingState, level: int, delta):
    """Round scarce containers of a class down to a common type or drop them.

    Returns the new state and the :class:`GroupResult`.  Afterwards every
    container of the class has s(C) mult(C, x) = 0 or >= delta.
    """
    if not delta > 0:
        raise RebuildError("delta must be positive")
    res = partition_scarce(state, level, delta)
    target: dict = {}
    for members, t in res.groups:
        for C in members:
            target[C] = t
    for C in res.deleted:
        target[C] = None
    if not target:
        return state.copy(), res

    def fn(p):
        out: dict = {}
        for C, c in p.counts:
            t = target.get(C, C)
            if t is not None:
                out[t] = out.get(t, 0) + c
        return out

    return _rewrite(state, fn), res


def def_increase_bound(old: PackingState, new: PackingState, level: int) -> float:
    """sigma * t_sigma, with t_sigma the largest prefix shortfall at sizes <= sigma.

    Raises if the new slots do not dominate the old ones above sigma.
    """
    sigma = class_sigma(level)
    m_old, m_new = container_mults(old.x), container_mults(new.x)
    agg: dict = {}
    for C, v in m_old.items():
        agg[C.size] = agg.get(C.size, 0.0) + v
    for C, v in m_new.items():
        agg[C.size] = agg.get(C.size, 0.0) - v
    t, run = 0.0, 0.0
    for s in sorted(agg, reverse=True):
        run += agg[s]
        if s > sigma:
            if run > TOL * (1 + abs(run)):
                raise RebuildError(f"slot dominance violated above sigma at size {s}")
        else:
            t = max(t, run)
    return float(sigma) * t


# -- gluing --------------------------------------------------------------------------

@dataclass
class GlueResult:
    k: int
    glued: int = 0            # copies of C replaced by super-containers in patterns
    supers: list = field(default_factory=list)
    leftover: list = field(default_factory=list)
    pattern_types: list = field(default_factory=list)   # the kC that patterns now hold

    def as_dict(self) -> dict:
        return {"k": self.k, "glued": self.glued, "supers": [repr(C) for C in self.supers],
                "leftover": [repr(C) for C in self.leftover],
                "pattern_types": [repr(C) for C in self.pattern_types]}


def glue_size_class(state: PackingState, level: int, k: int):
    """Replace k*floor(p_C/k) copies of every class container C by floor(p_C/k) copies of kC.

    The inventory is rebuilt through the red/blue decomposition: red slots are
    the copies that get glued, red containers are grouped k at a time
    (largest first) into super-containers, and the fewer than k smallest red
    containers stay as they are.
    """
    if k < 2:
        raise RebuildError("gluing needs k >= 2")
    sigma = class_sigma(level)
    sizes = state.sizes
    g = g2(state)
    red = []
    any_red = False
    for (C, j), m in zip(g.right_keys, g.right_mult):
        if size_class(C.size) == level:
            q = state.x[j].pattern.get(C) // k
            red.append(min(k * q * state.x[j].value, m))
            any_red = any_red or q > 0
        else:
            red.append(0.0)
    res = GlueResult(k)
    if not any_red:
        return state.copy(), res
    if k * sigma > 1:
        raise RebuildError(f"k * sigma = {k * sigma} > 1: super-containers would not fit")

    g_red, g_blue = decompose_red_blue(g, red, sigma)
    y = {}
    for C, m in zip(g_blue.left_keys, g_blue.left_mult):
        if m:
            y[C] = y.get(C, 0) + int(m)
    expanded = []
    order = sorted(range(g_red.n_left), key=lambda u: (g_red.left_keys[u].sort_key, u))
    for u in order:
        expanded += [g_red.left_keys[u]] * int(g_red.left_mult[u])
    full = len(expanded) // k * k
    for a in range(0, full, k):
        S = expanded[a]
        for C in expanded[a + 1:a + k]:
            S = S + C
        res.supers.append(S)
        y[S] = y.get(S, 0) + 1
    for C in expanded[full:]:
        res.leftover.append(C)
        y[C] = y.get(C, 0) + 1

    cache: dict = {}

    def fn(p):
        out: dict = {}
        for C, c in p.counts:
            q = c // k if size_class(C.size) == level else 0
            if q:
                if C not in cache:
                    cache[C] = C.scaled(k, sizes)
                out[cache[C]] = out.get(cache[C], 0) + q
                res.glued += k * q
                c -= k * q
            if c:
                out[C] = out.get(C, 0) + c
        return out

    new = _rewrite(state, fn)
    new.y = y
    res.pattern_types = sorted(cache.values(), key=lambda C: C.sort_key)
    return new, res


def reassign_k(level: int) -> int:
    """floor((1/sigma)^(1/4)) for sigma = 2^-level."""
    return math.isqrt(math.isqrt(2**level))


def reassign_containers(state: PackingState, level: int):
    k = reassign_k(level)
    if k < 2:
        raise RebuildError(f"class 2^-{level} gives k = {k} < 2")
    return glue_size_class(state, level, k)


# -- incidence matrices --------------------------------------------------------------

@dataclass
class IncidenceMatrices:
    containers: list            # row containers, largest first
    A: np.ndarray
    A_shadow: np.ndarray
    levels: np.ndarray          # size class index of each row
    small: np.ndarray           # True for rows in small classes
    x: np.ndarray               # column weights
    eids: list
    A_live: np.ndarray | None = None     # shadow minus incidences whose host was deleted

    @property
    def n(self) -> np.ndarray:
        return self.A.sum(axis=1)

    @property
    def n_shadow(self) -> np.ndarray:
        return self.A_shadow.sum(axis=1)

    @property
    def row_sizes(self) -> np.ndarray:
        return np.array([float(C.size) for C in self.containers])

    @property
    def N(self) -> int:
        return self.A.shape[1]

    def class_rows(self) -> dict[int, np.ndarray]:
        out: dict[int, list] = {}
        for r, l in enumerate(self.levels):
            out.setdefault(int(l), []).append(r)
        return {l: np.array(rs) for l, rs in out.items()}


def incidence_row(state: PackingState, C: Container) -> np.ndarray:
    return np.array([float(e.pattern.get(C)) for e in state.x])


def incidence(state: PackingState, shadow: dict | None = None, small_from: int | None = None) -> IncidenceMatrices:
    """A for the state plus the shadow matrix.

    ``shadow`` maps small-class containers to their snapshot rows; rows of
    other containers in the shadow equal A.
    """
    shadow = shadow or {}
    rows = sorted(set(state.containers()) | set(shadow), key=lambda C: C.sort_key)
    N = len(state.x)
    A = np.zeros((len(rows), N))
    S = np.zeros((len(rows), N))
    levels = np.zeros(len(rows), dtype=int)
    for r, C in enumerate(rows):
        A[r] = incidence_row(state, C)
        S[r] = shadow[C] if C in shadow else A[r]
        levels[r] = size_class(C.size)
    small = levels >= small_from if small_from is not None else np.zeros(len(rows), dtype=bool)
    return IncidenceMatrices(rows, A, np.maximum(S, A), levels, small,
                             np.array([e.value for e in state.x]), [e.eid for e in state.x])


# -- the driver ------------------------------------------------------------------------

@dataclass
class RebuildLog:
    steps: list = field(default_factory=list)

    @property
    def total_bound(self) -> float:
        return sum(s.bound for s in self.steps)

    @property
    def total_increase(self) -> float:
        return sum(s.increase for s in self.steps)

    def to_json(self) -> str:
        return json.dumps([s.as_dict() for s in self.steps], sort_keys=True)

    def deleted_glued(self) -> list[str]:
        """Glued container types that a later grouping deleted.

        Their pieces keep their shadow incidences while the host row is
        gone, which is the one way property (C) can fail.
        """
        glued: set = set()
        out = []
        for s in self.steps:
            if s.op == "glue":
                glued.update(s.detail.get("pattern_types", []))
            else:
                out += [C for C in s.detail.get("deleted", []) if C in glued]
        return out


def sigma_level(sigma) -> int:
    sigma = Fraction(sigma)
    return size_class(sigma)


class _Lineage:
    """Which glued pieces every container occurrence hides, per pattern column.

    ``bags[(j, D)]`` maps piece containers to the number of their copies
    inside the occurrences of D in column j.  Rounding moves a bag to the
    target type, gluing moves a proportional share into the super-container,
    and deletion drops the bag along with the shadow incidences it holds.
    """

    def __init__(self, n_cols: int):
        self.bags: dict = {}
        self.dropped: dict = {}      # piece -> per-column count of orphaned shadow incidences
        self.n_cols = n_cols

    def _add(self, key, piece, v):
        bag = self.bags.setdefault(key, {})
        bag[piece] = bag.get(piece, 0.0) + v

    def grouped(self, old: PackingState, res: GroupResult):
        target = {C: t for members, t in res.groups for C in members if C != t}
        deleted = set(res.deleted)
        for j, e in enumerate(old.x):
            for D, _ in e.pattern.counts:
                if D in deleted:
                    for P, v in self.bags.pop((j, D), {}).items():
                        row = self.dropped.setdefault(P, np.zeros(self.n_cols))
                        row[j] += v
                elif D in target and (j, D) in self.bags:
                    for P, v in self.bags.pop((j, D)).items():
                        self._add((j, target[D]), P, v)

    def glued(self, old: PackingState, level: int, k: int):
        for j, e in enumerate(old.x):
            for D, c in e.pattern.counts:
                q = c // k if size_class(D.size) == level else 0
                if not q:
                    continue
                S = D.scaled(k, old.sizes)
                share = k * q / c
                bag = self.bags.get((j, D), {})
                for P, v in list(bag.items()):
                    self._add((j, S), P, share * v)
                    bag[P] = v * (1 - share)
                self._add((j, S), D, k * q)
                if q * k == c:
                    self.bags.pop((j, D), None)

    def live(self, shadow: dict) -> dict:
        return {C: np.maximum(row - self.dropped.get(C, 0.0), 0.0) for C, row in shadow.items()}


def rebuild_all(state: PackingState, params, *, measure: bool = True):
    """Group and glue every small class (smallest first), then group large classes.

    Rows of small-class containers are snapshotted into the shadow after
    their class is grouped and kept from then on, even if a later grouping
    deletes the super-container that holds them.  ``A_live`` is the same
    shadow without those orphaned incidences.  Returns
    ``(state, IncidenceMatrices, RebuildLog)``.
    """
    small_from = sigma_level(params.sigma_small)
    log = RebuildLog()
    shadow: dict = {}
    lineage = _Lineage(len(state.x))
    cur = state
    present = {size_class(C.size) for C in cur.containers()}
    top = max(present, default=-1)
    d_cur = deficiency(cur) if measure else 0.0

    def record(op, level, param, new, bound, detail):
        nonlocal d_cur
        d_new = deficiency(new) if measure else 0.0
        log.steps.append(StepRecord(op, level, float(param), d_cur, d_new, bound, detail))
        d_cur = d_new

    for level in range(top, small_from - 1, -1):
        if not class_members(cur, level):
            continue
        delta = 2.0 ** (-level / 2)
        new, res = group_size_class(cur, level, delta)
        record("group", level, delta, new, 6 * delta, res.as_dict())
        lineage.grouped(cur, res)
        cur = new
        for C in class_members(cur, level):
            shadow[C] = incidence_row(cur, C)
        k = reassign_k(level)
        new, res = reassign_containers(cur, level)
        record("glue", level, k, new, 3 * k * float(class_sigma(level)), res.as_dict())
        if res.glued:
            lineage.glued(cur, level, k)
        cur = new
    for level in range(min(small_from - 1, top), -1, -1):
        if not class_members(cur, level):
            continue
        delta = float(params.delta_large)
        new, res = group_size_class(cur, level, delta)
        record("group", level, delta, new, 6 * delta, res.as_dict())
        lineage.grouped(cur, res)
        cur = new
    M = incidence(cur, shadow, small_from)
    live = incidence(cur, lineage.live(shadow), small_from)
    M.A_live = live.A_shadow
    return cur, M, log


# -- properties (A), (B), (C) ------------------------------------------------------

@dataclass
class PropertyReport:
    """(A), (B) and (C) on the shadow matrix; ``C_live`` is (C) on ``A_live``.

    (C) on the full shadow can fail when grouping deletes a glued
    super-container, because its pieces keep their shadow incidences; the
    series argument only covers pieces of containers still present, which
    is what ``C_live`` checks.  ``ok`` uses ``C_live``.
    """

    A: bool
    B: bool
    C: bool
    violations: list = field(default_factory=list)
    c_constant: float = 0.0
    C_live: bool = True

    @property
    def ok(self) -> bool:
        return self.A and self.B and self.C_live


def series_constant(k_min: int, depth: int) -> float:
    """Bound on the shadow weight of one container over ``depth`` gluing levels.

    A container built from k pieces has pieces of size at most 2 s(C) / k, so
    each level down scales the 17/16-weighted contribution by
    r = 2^(17/16) k^(-1/16).
    """
    r = 2 ** (17 / 16) * k_min ** (-1 / 16)
    return float(sum(r**t for t in range(depth + 1)))


def check_properties(M: IncidenceMatrices, params) -> PropertyReport:
    small_from = sigma_level(params.sigma_small)
    sizes = M.row_sizes
    n, ns = M.n, M.n_shadow
    viol = []
    okA = okB = True
    for r, C in enumerate(M.containers):
        level = int(M.levels[r])
        if M.small[r]:
            delta = 2.0 ** (-level / 2)
            if ns[r] > 0 and sizes[r] * ns[r] < delta * (1 - TOL):
                okA = False
                viol.append(f"(A) row {r} {C!r}: s*n~ = {sizes[r] * ns[r]:.6g} < {delta:.6g}")
            cap = 2.0 ** (level / 4)
            if M.A[r].max(initial=0) > cap + TOL:
                okB = False
                viol.append(f"(B) row {r} {C!r}: max entry {M.A[r].max():g} > {cap:.6g}")
        else:
            delta = float(params.delta_large)
            if n[r] > 0 and sizes[r] * n[r] < delta * (1 - TOL):
                okA = False
                viol.append(f"(A) row {r} {C!r}: s*n = {sizes[r] * n[r]:.6g} < {delta:.6g}")
    small_levels = sorted({int(l) for l, s in zip(M.levels, M.small) if s})
    if small_levels:
        k_min = reassign_k(max(small_from, min(small_levels)))
        depth = len(small_levels)
    else:
        k_min, depth = 2, 0
    c = series_constant(max(k_min, 2), depth)
    rhs = c * float(np.sum(n * sizes))

    def prop_c(shadow_counts, tag):
        lhs = float(np.sum(shadow_counts * sizes ** (17 / 16)))
        good = lhs <= rhs * (1 + TOL) + TOL
        if not good:
            viol.append(f"{tag} {lhs:.6g} > {c:.4g} * {rhs / c if c else 0:.6g}")
        return good

    okC = prop_c(ns, "(C)")
    okL = okC if M.A_live is None else prop_c(np.maximum(M.A_live, M.A).sum(axis=1), "(C live)")
    return PropertyReport(okA, okB, okC, viol, c, okL)
