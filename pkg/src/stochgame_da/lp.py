"""Dense revised simplex for small standard-form LPs.

Solves ``max c.x  s.t.  A x = b, x >= 0`` with a two-phase method and Bland's
smallest-index rule, so degenerate problems cannot cycle.  Problem sizes here
are a few hundred variables at most; the basis is re-factorised every pivot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleLP, LPError

PIVOT_TOL = 1e-11
COST_TOL = 1e-10


@dataclass
class LPResult:
    x: np.ndarray
    value: float
    basis: np.ndarray
    duals: np.ndarray        # y with A^T y >= c at optimality (rows of the reduced system)
    rows: np.ndarray         # indices of the independent rows kept from A
    dual_value: float
    duality_gap: float       # |c.x - b.y|
    dual_infeasibility: float  # max(c - A^T y, 0)
    iterations: int

    def certificate(self) -> dict:
        return {"basis": self.basis.tolist(), "duals": self.duals.tolist(),
                "rows": self.rows.tolist(), "primal": self.value,
                "dual": self.dual_value, "gap": self.duality_gap,
                "dual_infeasibility": self.dual_infeasibility}


def independent_rows(A: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Greedy Gram-Schmidt choice of a maximal set of independent rows."""
    kept = []
    Q = np.zeros((0, A.shape[1]))
    for k, row in enumerate(A):
        r = row - Q.T @ (Q @ row)
        r = r - Q.T @ (Q @ r)
        nrm = np.linalg.norm(r)
        if nrm > tol * max(1.0, np.linalg.norm(row)):
            kept.append(k)
            Q = np.vstack([Q, r / nrm])
    return np.array(kept, dtype=int)


def _simplex(c, A, b, basis, max_iter):
    """Phase-agnostic revised simplex from a feasible basis (maximisation)."""
    m, N = A.shape
    basis = basis.copy()
    it = 0
    while True:
        B = A[:, basis]
        xb = np.linalg.solve(B, b)
        y = np.linalg.solve(B.T, c[basis])
        reduced = c - A.T @ y
        reduced[basis] = 0.0
        entering = np.flatnonzero(reduced > COST_TOL)
        if entering.size == 0:
            return basis, xb, y, it
        j = int(entering[0])  # Bland: smallest improving index
        col = np.linalg.solve(B, A[:, j])
        pos = np.flatnonzero(col > PIVOT_TOL)
        if pos.size == 0:
            raise LPError("LP is unbounded")
        ratios = np.maximum(xb[pos], 0.0) / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-13 * max(1.0, best)]
        leave = ties[np.argmin(basis[ties])]  # Bland: smallest basic index among ties
        basis[leave] = j
        it += 1
        if it > max_iter:
            raise LPError(f"simplex did not terminate in {max_iter} pivots")


def solve_lp(c, A, b, max_iter: int = 50_000) -> LPResult:
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    rows = independent_rows(np.column_stack([A, b]))
    core = independent_rows(A)
    if len(rows) > len(core):
        raise InfeasibleLP("equality system is inconsistent")
    A, b = A[core], b[core]
    m, N = A.shape
    sign = np.where(b < 0, -1.0, 1.0)
    A1, b1 = A * sign[:, None], b * sign

    # phase 1: maximise -sum(artificials)
    Aa = np.hstack([A1, np.eye(m)])
    ca = np.concatenate([np.zeros(N), -np.ones(m)])
    basis, xb, _, it1 = _simplex(ca, Aa, b1, np.arange(N, N + m), max_iter)
    if xb[basis >= N].sum() > 1e-9 * max(1.0, np.abs(b1).max(initial=0.0)):
        raise InfeasibleLP("LP is infeasible")
    # drive zero-level artificials out of the basis
    for r in range(m):
        if basis[r] >= N:
            B = Aa[:, basis]
            rowinv = np.linalg.solve(B.T, np.eye(m)[r])
            cand = [j for j in range(N) if j not in set(basis) and abs(rowinv @ A1[:, j]) > 1e-9]
            if not cand:
                raise LPError("degenerate artificial could not leave the basis")
            basis[r] = cand[0]
    basis, xb, y, it2 = _simplex(c, A1, b1, basis, max_iter)
    x = np.zeros(N)
    x[basis] = xb
    value = float(c @ x)
    y = y * sign  # duals for the unflipped rows
    dual_value = float(b @ y)
    dual_inf = float(max(0.0, (c - A.T @ y).max(initial=0.0)))
    return LPResult(x, value, basis, y, core, dual_value, abs(value - dual_value),
                    dual_inf, it1 + it2)
