"""Partial coloring by a projected Gaussian walk, and the interval constraints fed to it.

The walk takes ``x_start`` in [0,1]^N and a list of constraints ``(v, lam)``.
It moves ``x`` by Gaussian steps restricted to the subspace orthogonal to the
exact constraints (lam = 0), the coordinates already at 0 or 1 and the
inequality constraints that have become tight.  Steps are cut short at the
first boundary they would cross, and the coordinate or constraint that was hit
joins the frozen set.  The run succeeds once at least half the coordinates
are integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

RANK_TOL = 1e-10
# support constant L for which sum exp(-lam^2/16) + 1 <= N/16 held on every
# calibration state with N >= L log2(1/s_min) (scripts/calibrate_budget.py);
# the worst violating state seen had N / log2(1/s_min) just under 10
BUDGET_L = 16.0


class BudgetViolation(ValueError):
    def __init__(self, budget: float, N: int):
        super().__init__(f"constraint budget {budget:.4g} exceeds N/16 = {N / 16:.4g}")
        self.budget = budget
        self.N = N


class WalkFailure(RuntimeError):
    pass


def budget_value(lams) -> float:
    return float(sum(math.exp(-(l * l) / 16) for l in lams))


# -- interval family --------------------------------------------------------------------

@dataclass
class Interval:
    level_class: int            # size class index of its rows
    level: int                  # refinement level, also the lambda of the constraint
    start: int                  # first global row
    stop: int                   # one past the last row
    n_shadow: float
    v: np.ndarray
    children: list = field(default_factory=list)

    @property
    def lam(self) -> float:
        return float(self.level)

    def __len__(self):
        return self.stop - self.start

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.v))


@dataclass
class IntervalFamily:
    roots: dict                 # class index -> list of level-0 intervals
    N: int
    K: float
    small_classes: set
    budget: float = 0.0

    def intervals(self) -> list[Interval]:
        out = []
        stack = [I for c in sorted(self.roots) for I in reversed(self.roots[c])]
        while stack:
            I = stack.pop()
            out.append(I)
            stack.extend(reversed(I.children))
        return out

    def constraints(self) -> list[tuple[np.ndarray, float]]:
        """All non-zero interval vectors plus the all-ones objective, lam = 0."""
        cons = [(I.v, I.lam) for I in self.intervals() if np.any(I.v)]
        cons.append((np.ones(self.N), 0.0))
        return cons


def _split(rows, ns, single_thr, cap):
    """Contiguous pieces: heavy rows alone, the rest packed up to ``cap``."""
    pieces, cur, acc = [], [], 0.0
    for r in rows:
        if ns[r] > single_thr:
            if cur:
                pieces.append(cur)
            pieces.append([r])
            cur, acc = [], 0.0
            continue
        if cur and acc + ns[r] > cap:
            pieces.append(cur)
            cur, acc = [], 0.0
        cur.append(r)
        acc += ns[r]
    if cur:
        pieces.append(cur)
    return pieces


def build_intervals(M, params) -> IntervalFamily:
    """Leveled interval family over the rows of the incidence matrices.

    Small class sigma: on level l, rows with shadow count above
    tau / 2^(l+1) stand alone and the others are packed left to right into
    intervals of shadow count at most tau / 2^l, tau = K (1/sigma)^(17/16).
    Every non-singleton interval is refined on the next level until only
    singletons remain; a refinement that would reproduce the same interval is
    skipped, since it only repeats a constraint with a looser lambda.  Large
    classes contribute one lambda = 0 singleton per row.
    """
    K = float(params.budget_K)
    ns = M.n_shadow
    roots: dict = {}
    small = set()
    for c, rows in sorted(M.class_rows().items()):
        rows = list(rows)
        if not M.small[rows[0]]:
            roots[c] = [_make(M, c, 0, [r]) for r in rows]
            continue
        small.add(c)
        tau = K * float(2.0 ** c) ** (17 / 16)
        top = [_make(M, c, 0, p) for p in _split(rows, ns, tau / 2, tau)]
        stack = [(I, 0) for I in top]
        while stack:
            I, lvl = stack.pop()
            if len(I) == 1:
                continue
            level = lvl + 1
            members = list(range(I.start, I.stop))
            pieces = _split(members, ns, tau / 2 ** (level + 1), tau / 2 ** level)
            while len(pieces) == 1:
                level += 1
                pieces = _split(members, ns, tau / 2 ** (level + 1), tau / 2 ** level)
            I.children = [_make(M, c, level, p) for p in pieces]
            stack.extend((J, level) for J in I.children)
        roots[c] = top
    fam = IntervalFamily(roots, M.N, K, small)
    fam.budget = budget_value(I.lam for I in fam.intervals() if np.any(I.v)) + 1
    return fam


def _make(M, c, level, rows) -> Interval:
    a, b = rows[0], rows[-1] + 1
    return Interval(c, level, a, b, float(M.n_shadow[a:b].sum()), M.A[a:b].sum(axis=0))


def prefix_decomposition(fam: IntervalFamily, i: int) -> list[Interval]:
    """Intervals of the family whose disjoint union is rows 0..i."""
    out = []
    for c in sorted(fam.roots, key=lambda c: fam.roots[c][0].start):
        for I in fam.roots[c]:
            _cover(I, i, out)
    return out


def _cover(I: Interval, i: int, out: list):
    if I.start > i:
        return
    if I.stop - 1 <= i:
        out.append(I)
        return
    if not I.children:
        raise ValueError("interval family does not resolve the prefix")
    for J in I.children:
        _cover(J, i, out)


def prefix_error_bound(fam: IntervalFamily, x_start, x_end, i: int) -> float:
    """Sum of lam * ||v|| over the prefix decomposition of rows 0..i.

    If every family constraint held for ``x_end``, the prefix row sums of
    ``A (x_start - x_end)`` are at most this value in absolute terms.
    """
    n_rows = max((I.stop for Is in fam.roots.values() for I in Is), default=0)
    if not 0 <= i < n_rows:
        raise IndexError(f"row {i} out of range 0..{n_rows - 1}")
    return float(sum(I.lam * I.norm for I in prefix_decomposition(fam, i)))


# -- the walk ---------------------------------------------------------------------------

@dataclass
class WalkResult:
    x: np.ndarray
    success: bool
    attempts: int
    steps: int
    integral: int
    trace: list = field(default_factory=list)


def _null_basis(W: np.ndarray, d: int) -> np.ndarray:
    """Orthonormal basis (as columns) of the complement of the row space of W in R^d."""
    if W.shape[0] == 0:
        return np.eye(d)
    _, s, vt = np.linalg.svd(W, full_matrices=True)
    rank = int(np.sum(s > RANK_TOL * max(1.0, s[0]))) if s.size else 0
    return vt[rank:].T


def _walk_once(x0, V, lams, norms, exact, params, rng, trace_on):
    N = x0.size
    x = x0.copy()
    gamma = params.gamma
    T = math.ceil(params.c_T / gamma**2)
    dfz = params.delta_freeze
    at_bound = (x <= 0) | (x >= 1)
    frozen = at_bound | (x <= dfz) | (x >= 1 - dfz)
    ineq = np.flatnonzero(~exact)
    tight = np.zeros(len(lams), dtype=bool)
    caps = lams * norms
    trace = []
    basis = None
    steps = 0
    for steps in range(1, T + 1):
        if basis is None:
            free = np.flatnonzero(~frozen)
            rows = np.flatnonzero(exact | tight)
            W = V[np.ix_(rows, free)] if rows.size else np.zeros((0, free.size))
            basis = _null_basis(W, free.size)
        if basis.shape[1] == 0:
            steps -= 1
            break
        u = np.zeros(N)
        u[free] = gamma * (basis @ rng.standard_normal(basis.shape[1]))
        # largest alpha <= 1 keeping x in the box and the open constraints inside
        alpha, hit = 1.0, None
        uf = u[free]
        xf = x[free]
        with np.errstate(divide="ignore", invalid="ignore"):
            lim = np.where(uf > 0, (1 - xf) / uf, np.where(uf < 0, -xf / uf, np.inf))
        if lim.size:
            j = int(np.argmin(lim))
            if lim[j] < alpha:
                alpha, hit = float(lim[j]), ("coord", int(free[j]), 1.0 if uf[j] > 0 else 0.0)
        open_ineq = ineq[~tight[ineq]]
        if open_ineq.size:
            cur = V[open_ineq] @ (x - x0)
            du = V[open_ineq] @ u
            cap = caps[open_ineq]
            with np.errstate(divide="ignore", invalid="ignore"):
                lim2 = np.where(du > 0, (cap - cur) / du, np.where(du < 0, (-cap - cur) / du, np.inf))
            lim2 = np.maximum(lim2, 0.0)
            j = int(np.argmin(lim2))
            if lim2[j] < alpha:
                alpha, hit = float(lim2[j]), ("cons", int(open_ineq[j]), None)
        x = x + alpha * u
        changed = False
        if hit is not None and hit[0] == "coord":
            x[hit[1]] = hit[2]
        x = np.clip(x, 0.0, 1.0)
        if hit is not None and hit[0] == "cons":
            tight[hit[1]] = True
            changed = True
        newly = ~frozen & ((x <= dfz) | (x >= 1 - dfz))
        if newly.any():
            frozen |= newly
            changed = True
        if open_ineq.size:
            near = np.abs(V[open_ineq] @ (x - x0)) >= (1 - dfz) * caps[open_ineq]
            if near.any():
                tight[open_ineq[near]] = True
                changed = True
        if changed:
            basis = None
        if trace_on:
            trace.append((steps, int(frozen.sum()), int(tight.sum())))
    return x, steps, trace


def partial_color(x_start, constraints, params, rng=None, *, trace: bool = False) -> WalkResult:
    """Round at least half of ``x_start`` to 0/1 while respecting the constraints.

    ``constraints`` is a list of ``(v, lam)``; lam = 0 marks a constraint that
    must be preserved exactly.  Raises :class:`BudgetViolation` before walking
    if sum exp(-lam^2/16) > N/16.  On success every inequality satisfies
    |<x_end - x_start, v>| <= lam ||v|| (1 + slack).
    """
    x0 = np.asarray(x_start, dtype=float).copy()
    N = x0.size
    if N == 0:
        return WalkResult(x0, True, 0, 0, 0)
    if x0.min() < 0 or x0.max() > 1:
        raise ValueError("x_start must lie in [0, 1]^N")
    if rng is None:
        rng = np.random.default_rng(params.rng_seed)
    cons = [(np.asarray(v, float), float(l)) for v, l in constraints]
    for v, l in cons:
        if v.shape != (N,):
            raise ValueError("constraint vector has the wrong length")
        if l < 0:
            raise ValueError("lambda must be non-negative")
    b = budget_value(l for _, l in cons)
    if b > N / 16 + 1e-12:
        raise BudgetViolation(b, N)
    cons = [(v, l) for v, l in cons if np.any(v)]
    V = np.array([v for v, _ in cons]).reshape(len(cons), N)
    lams = np.array([l for _, l in cons])
    norms = np.linalg.norm(V, axis=1) if len(cons) else np.zeros(0)
    exact = lams == 0
    need = math.ceil(N / 2)
    snap = params.snap_tol
    x, steps, tr = x0, 0, []
    for attempt in range(1, params.retries + 2):
        x, steps, tr = _walk_once(x0, V, lams, norms, exact, params, rng, trace)
        lo, hi = x <= snap, x >= 1 - snap
        integral = int(lo.sum() + hi.sum())
        if integral >= need:
            x = np.where(lo, 0.0, np.where(hi, 1.0, x))
            return WalkResult(x, True, attempt, steps, integral, tr)
    return WalkResult(x, False, params.retries + 1, steps, integral, tr)
