"""Regularised argmax oracles over occupation polytopes.

The quadratic regulariser ``c * ||rho||^2`` turns the dual-averaging argmax
into a Euclidean projection of ``Y / (2c)``; the entropic variant is a
multiplicative step on the simplex followed by an I-projection onto the
polytope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GameInputError, ProjectionError
from .occupancy import OccupationPolytope

KKT_TOL = 1e-8


@dataclass(frozen=True)
class Regularizer:
    kind: str = "quadratic"   # "quadratic" | "entropy"
    coef: float = 0.5

    def __post_init__(self):
        if self.kind not in ("quadratic", "entropy"):
            raise ValueError(f"unknown regularizer {self.kind!r}")
        if self.coef <= 0:
            raise ValueError("regularizer coefficient must be positive")

    @property
    def strong_convexity(self) -> float:
        return 2.0 * self.coef if self.kind == "quadratic" else 1.0


@dataclass
class ProjectionInfo:
    working: list
    iterations: int
    kkt_residual: float


def _solve_gram(M, rhs):
    try:
        return np.linalg.solve(M @ M.T, rhs)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(M @ M.T, rhs, rcond=None)[0]


def euclidean_project(polytope: OccupationPolytope, y, start=None, working=None,
                      return_info: bool = False):
    """Closest point of the polytope to ``y``.

    Equalities are eliminated through the nullspace basis ``Z`` (``rho = x0 + Z z``),
    and a primal active-set loop handles the bounds ``rho >= delta``.  ``start``
    must be a feasible point; ``working`` a set of bounds active there whose
    rows of ``Z`` are independent (e.g. the final working set of a previous call).
    """
    y = np.asarray(y, dtype=float)
    Z, x0, delta = polytope.Z, polytope.x0, polytope.delta
    D = polytope.dim
    if Z.shape[1] == 0:
        rho = x0.copy()
        info = ProjectionInfo([], 0, kkt_residual(polytope, rho, y))
        return (rho, info) if return_info else rho
    lo = delta - x0
    z_target = Z.T @ (y - x0)
    if start is None:
        start, working = polytope.center, None
    z = Z.T @ (np.asarray(start, dtype=float) - x0)
    W = list(working) if working is not None else []
    limit = 10 * D
    changes = 0
    it = 0
    while True:
        it += 1
        if W:
            ZW = Z[W]
            mu = _solve_gram(ZW, ZW @ z_target - lo[W])
            z_eq = z_target - ZW.T @ mu
        else:
            z_eq = z_target
        p = z_eq - z
        if np.linalg.norm(p) <= 1e-13 * (1.0 + np.linalg.norm(z)):
            if not W:
                break
            lam = _solve_gram(Z[W], Z[W] @ (z - z_target))
            k = int(np.argmin(lam))
            if lam[k] >= -1e-12:
                break
            W.pop(k)
        else:
            Zp = Z @ p
            slack = Z @ z - lo
            mask = Zp < -1e-15
            if W:
                mask[W] = False
            alpha, block = 1.0, -1
            if mask.any():
                idx = np.flatnonzero(mask)
                ratios = np.maximum(slack[idx], 0.0) / -Zp[idx]
                j = int(np.argmin(ratios))
                if ratios[j] < 1.0:
                    alpha, block = float(ratios[j]), int(idx[j])
            z = z + alpha * p
            if block < 0:
                continue
            W.append(block)
        changes += 1
        if changes > limit:
            raise ProjectionError(f"active set did not settle after {limit} changes")
    rho = x0 + Z @ z
    if W:
        rho[W] = delta  # exact on the active bounds
    if return_info:
        return rho, ProjectionInfo(W, it, kkt_residual(polytope, rho, y))
    return rho


def kkt_residual(polytope: OccupationPolytope, rho, y) -> float:
    """Largest of primal infeasibility, multiplier sign violation and stationarity error.

    Multipliers come from least squares on ``rho - y = -A_eq^T mu + lam`` with
    ``lam`` supported on the active bounds.
    """
    rho = np.asarray(rho, dtype=float)
    primal = polytope.residual(rho)
    active = np.flatnonzero(rho <= polytope.delta + 1e-10)
    g = rho - y
    M = np.hstack([-polytope.A_eq.T, np.eye(polytope.dim)[:, active]])
    coef = np.linalg.lstsq(M, g, rcond=None)[0]
    stat = np.abs(M @ coef - g).max()
    lam = coef[polytope.A_eq.shape[0]:]
    sign = max(0.0, -lam.min()) if lam.size else 0.0
    scale = max(1.0, np.abs(y).max())
    return float(max(primal, stat / scale, sign / scale))


def da_argmax(polytope: OccupationPolytope, Y, reg: Regularizer, **warm):
    """``argmax <rho, Y> - c ||rho||^2`` over the polytope."""
    if reg.kind != "quadratic":
        raise ValueError("da_argmax handles the quadratic regulariser; use the KL pathway for entropy")
    return euclidean_project(polytope, np.asarray(Y, dtype=float) / (2.0 * reg.coef), **warm)


def kl_simplex_step(rho, g) -> np.ndarray:
    """``argmax_{p in simplex} <g, p> - KL(p, rho)``, i.e. ``p ~ rho * exp(g)``."""
    rho = np.asarray(rho, dtype=float)
    g = np.asarray(g, dtype=float)
    if np.any(rho <= 0):
        raise GameInputError("KL step needs a strictly positive distribution")
    if not np.all(np.isfinite(g)):
        raise GameInputError("KL step needs a finite direction")
    logits = np.log(rho) + g
    w = np.exp(logits - logits.max())
    return w / w.sum()


def kl_divergence(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    nz = p > 0
    return float(np.sum(p[nz] * np.log(p[nz] / q[nz])))


def kl_project(polytope: OccupationPolytope, q, dual=None, return_dual: bool = False,
               max_iter: int = 10_000):
    """I-projection ``argmin_{rho in polytope} KL(rho, q)`` of a positive vector q.

    Solved in the dual: ``rho(mu) ~ q * exp(-F^T mu)`` where F are the flow rows,
    and Newton steps with backtracking minimise the log-partition in mu.
    The bound ``delta`` is ignored (the projection is onto the unshrunk set).
    """
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0) or not np.all(np.isfinite(q)):
        raise GameInputError("KL projection needs a strictly positive finite vector")
    S = polytope.n_states
    F = polytope.A_eq[:S]
    logq = np.log(q)
    mu = np.zeros(S) if dual is None else np.asarray(dual, dtype=float).copy()

    def state(m):
        logits = logq - F.T @ m
        top = logits.max()
        w = np.exp(logits - top)
        Zs = w.sum()
        return w / Zs, np.log(Zs) + top

    rho, phi = state(mu)
    resid = np.abs(F @ rho).max()
    for _ in range(max_iter):
        if resid <= 1e-13:
            break
        grad = -F @ rho
        H = (F * rho) @ F.T - np.outer(F @ rho, F @ rho)
        step = -np.linalg.lstsq(H, grad, rcond=None)[0]
        t = 1.0
        while True:
            cand = mu + t * step
            r2, p2 = state(cand)
            # near the optimum phi changes below roundoff; fall back to the residual
            if (p2 <= phi + 1e-4 * t * (grad @ step) or np.abs(F @ r2).max() < 0.5 * resid
                    or t < 1e-10):
                break
            t *= 0.5
        change = np.abs(cand - mu).max() / max(1.0, np.abs(mu).max())
        mu, rho, phi = cand, r2, p2
        resid = np.abs(F @ rho).max()
        if resid <= 1e-9 and change <= 1e-12:
            break
    else:
        raise ProjectionError("KL projection did not converge", resid)
    if resid > 1e-9:
        raise ProjectionError("KL projection did not converge", resid)
    return (rho, mu) if return_dual else rho
