"""Revised simplex for covering LPs ``min c^T x  s.t.  A x >= b, x >= 0``.

Surplus variables are implicit: variable ``i < m`` (m = number of rows) is the
surplus of row ``i`` (column ``-e_i``, cost 0), variable ``m + j`` is column
``j`` of ``A``.  Columns may be appended between solves, which is all the
column-generation master needs.

The basis inverse is kept explicitly and updated with an eta step per pivot,
with a fresh inversion every ``refactor_every`` pivots.  Entering variables
are chosen by Dantzig's rule; after a run of degenerate pivots the method
switches to Bland's rule (smallest index enters, smallest index leaves) until
the objective moves again, which rules out cycling.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse


class SimplexError(RuntimeError):
    pass


class CoveringSimplex:
    def __init__(self, b, *, tol: float = 1e-10, pivot_tol: float = 1e-9, rule: str = "auto",
                 refactor_every: int = 100, degenerate_limit: int = 20):
        self.b = np.asarray(b, dtype=float)
        self.m = len(self.b)
        self.tol = tol
        self.pivot_tol = pivot_tol
        if rule not in ("auto", "bland", "dantzig"):
            raise ValueError(rule)
        self.rule = rule
        self.refactor_every = refactor_every
        self.degenerate_limit = degenerate_limit
        self._idx: list[np.ndarray] = []
        self._val: list[np.ndarray] = []
        self._costs: list[float] = []
        self._At = None
        self.basis: list[int] | None = None
        self._Binv: np.ndarray | None = None
        self.pivots = 0

    # -- columns -----------------------------------------------------------
    def add_column(self, a, cost: float = 1.0) -> int:
        a = np.asarray(a, dtype=float)
        if a.shape != (self.m,):
            raise ValueError("column has wrong length")
        nz = np.flatnonzero(a)
        self._idx.append(nz)
        self._val.append(a[nz])
        self._costs.append(float(cost))
        self._At = None
        return self.m + len(self._costs) - 1

    def _transposed(self):
        """Structural columns as the rows of a CSR matrix."""
        if self._At is None:
            k = len(self._idx)
            lens = np.fromiter((len(i) for i in self._idx), dtype=np.int64, count=k)
            ptr = np.concatenate([[0], np.cumsum(lens)])
            ind = np.concatenate(self._idx) if k else np.zeros(0, dtype=np.int64)
            val = np.concatenate(self._val) if k else np.zeros(0)
            self._At = sparse.csr_matrix((val, ind, ptr), shape=(k, self.m))
        return self._At

    @property
    def A(self) -> np.ndarray:
        return self._transposed().T.toarray()

    @property
    def n_vars(self) -> int:
        return self.m + len(self._costs)

    def column(self, var: int) -> np.ndarray:
        e = np.zeros(self.m)
        if var < self.m:
            e[var] = -1.0
        else:
            e[self._idx[var - self.m]] = self._val[var - self.m]
        return e

    def cost(self, var: int) -> float:
        return 0.0 if var < self.m else self._costs[var - self.m]

    def _basis_matrix(self) -> np.ndarray:
        B = np.zeros((self.m, self.m))
        for j, v in enumerate(self.basis):
            if v < self.m:
                B[v, j] = -1.0
            else:
                B[self._idx[v - self.m], j] = self._val[v - self.m]
        return B

    def _refactor(self):
        try:
            self._Binv = np.linalg.inv(self._basis_matrix())
        except np.linalg.LinAlgError as exc:
            raise SimplexError(f"singular basis: {exc}") from exc
        self._since_refactor = 0

    def _accurate(self, xB, y, cB) -> bool:
        B = self._basis_matrix()
        scale = 1.0 + np.abs(self.b).max(initial=0.0)
        return (np.abs(B @ xB - self.b).max(initial=0.0) <= 1e-9 * scale
                and np.abs(y @ B - cB).max(initial=0.0) <= 1e-9)

    # -- solve -------------------------------------------------------------
    def solve(self, basis=None, max_pivots: int = 200000):
        """Optimize from ``basis`` (or the previous optimal basis).

        The starting basis must be primal feasible.  Returns ``(x_B, y)``:
        basic values and row duals.
        """
        if basis is not None:
            self.basis = list(basis)
            self._Binv = None
        if self.basis is None or len(self.basis) != self.m:
            raise SimplexError("need a starting basis with one variable per row")
        if self._Binv is None:
            self._refactor()
        At = self._transposed()
        costs = np.asarray(self._costs)
        cB = np.array([self.cost(v) for v in self.basis])
        scratch = np.empty((self.m, self.m))
        degenerate = 0
        for _ in range(max_pivots):
            if self._since_refactor >= self.refactor_every:
                self._refactor()
            Binv = self._Binv
            xB = Binv @ self.b
            if xB.min() < -1e-7:
                self._refactor()
                Binv = self._Binv
                xB = Binv @ self.b
                if xB.min() < -1e-7:
                    raise SimplexError("basis lost primal feasibility")
            xB = np.maximum(xB, 0.0)
            y = cB @ Binv

            rc = np.concatenate([y, costs - At @ y])
            rc[self.basis] = 0.0
            candidates = np.flatnonzero(rc < -self.tol)
            if candidates.size == 0:
                if self._since_refactor and not self._accurate(xB, y, cB):
                    # confirm optimality on a fresh inverse
                    self._refactor()
                    continue
                self.x_B, self.duals = xB, y
                return xB, y
            bland = self.rule == "bland" or (self.rule == "auto" and degenerate >= self.degenerate_limit)
            if bland:
                entering = int(candidates[0])
            else:
                entering = int(candidates[np.argmin(rc[candidates])])

            d = Binv @ self.column(entering)
            rows = np.flatnonzero(d > self.pivot_tol)
            if rows.size == 0:
                raise SimplexError("unbounded direction in a covering LP")
            ratios = xB[rows] / d[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            if bland:
                leave = int(min(ties, key=lambda r: self.basis[r]))
            else:
                leave = int(ties[np.argmax(d[ties])])
            degenerate = degenerate + 1 if best <= 1e-12 else 0

            # eta update of the explicit inverse
            pivot_row = Binv[leave] / d[leave]
            np.multiply(d[:, None], pivot_row[None, :], out=scratch)
            Binv -= scratch
            Binv[leave] = pivot_row
            self.basis[leave] = entering
            cB[leave] = self.cost(entering)
            self._since_refactor += 1
            self.pivots += 1
        raise SimplexError(f"no convergence after {max_pivots} pivots")

    def primal(self) -> np.ndarray:
        """Full primal vector over the structural columns."""
        x = np.zeros(len(self._costs))
        for v, val in zip(self.basis, self.x_B):
            if v >= self.m:
                x[v - self.m] = val
        return x
