"""Slow, independent reference solvers used by the test suite and ``validate``.

None of these share code paths with the production solvers beyond the
polytope description itself.
"""

from __future__ import annotations

import itertools

import numpy as np

from .occupancy import OccupationPolytope


def _eq_rows(polytope: OccupationPolytope):
    # a row basis of the equalities via QR (no reuse of the production row filter)
    A, b = polytope.A_eq, polytope.b_eq
    q, r, piv = _qr_pivot(A.T)
    rank = int(np.sum(np.abs(np.diag(r)) > 1e-10 * max(1.0, abs(r[0, 0]))))
    keep = np.sort(piv[:rank])
    return A[keep], b[keep]


def _qr_pivot(M):
    # column-pivoted Gram-Schmidt, enough for the tiny matrices used here
    M = M.astype(float).copy()
    m, n = M.shape
    piv = np.arange(n)
    Q = np.zeros((m, min(m, n)))
    R = np.zeros((min(m, n), n))
    for k in range(min(m, n)):
        norms = np.linalg.norm(M[:, k:], axis=0)
        j = k + int(np.argmax(norms))
        M[:, [k, j]] = M[:, [j, k]]
        R[:, [k, j]] = R[:, [j, k]]
        piv[[k, j]] = piv[[j, k]]
        nk = np.linalg.norm(M[:, k])
        R[k, k] = nk
        if nk < 1e-14:
            break
        Q[:, k] = M[:, k] / nk
        R[k, k + 1:] = Q[:, k] @ M[:, k + 1:]
        M[:, k + 1:] -= np.outer(Q[:, k], R[k, k + 1:])
    return Q, R, piv


def brute_force_projection(polytope: OccupationPolytope, y, max_dim: int = 14):
    """Euclidean projection by enumerating every candidate active set.

    For each subset W of bounds, minimise ``||rho - y||`` subject to the
    equalities and ``rho[W] = delta`` (a KKT solve); keep the closest candidate
    that is feasible.  Exponential in the dimension.
    """
    y = np.asarray(y, dtype=float)
    D = polytope.dim
    if D > max_dim:
        raise ValueError(f"brute force limited to dimension {max_dim}")
    A, b = _eq_rows(polytope)
    best, best_d = None, np.inf
    for r in range(D + 1):
        for W in itertools.combinations(range(D), r):
            E = np.vstack([A, np.eye(D)[list(W)]]) if W else A
            f = np.concatenate([b, np.full(len(W), polytope.delta)])
            m = E.shape[0]
            K = np.block([[np.eye(D), E.T], [E, np.zeros((m, m))]])
            rhs = np.concatenate([y, f])
            sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
            rho = sol[:D]
            if np.abs(E @ rho - f).max() > 1e-9 or rho.min() < polytope.delta - 1e-10:
                continue
            dist = np.linalg.norm(rho - y)
            if dist < best_d - 1e-13:
                best, best_d = rho, dist
    return best


def vertex_lp(c, A, b, tol: float = 1e-10):
    """``max c.x s.t. A x = b, x >= 0`` by enumerating all basic solutions."""
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    rank = np.linalg.matrix_rank(A)
    # drop dependent rows by rank tests
    rows = []
    for i in range(A.shape[0]):
        if np.linalg.matrix_rank(A[rows + [i]]) > len(rows):
            rows.append(i)
    A, b = A[rows], b[rows]
    n = A.shape[1]
    best_x, best_v = None, -np.inf
    for B in itertools.combinations(range(n), rank):
        AB = A[:, B]
        if abs(np.linalg.det(AB)) < 1e-12:
            continue
        xB = np.linalg.solve(AB, b)
        if xB.min() < -tol:
            continue
        x = np.zeros(n)
        x[list(B)] = np.maximum(xB, 0.0)
        v = float(c @ x)
        if v > best_v:
            best_x, best_v = x, v
    return best_v, best_x


def polytope_vertices(polytope: OccupationPolytope):
    """All vertices of ``{A rho = b, rho >= delta}`` by basis enumeration."""
    A, b = _eq_rows(polytope)
    shift = b - polytope.delta * A.sum(axis=1)
    n = A.shape[1]
    out = []
    for B in itertools.combinations(range(n), A.shape[0]):
        AB = A[:, B]
        if abs(np.linalg.det(AB)) < 1e-12:
            continue
        xB = np.linalg.solve(AB, shift)
        if xB.min() < -1e-10:
            continue
        x = np.full(n, polytope.delta)
        x[list(B)] += np.maximum(xB, 0.0)
        if not any(np.abs(x - v).max() < 1e-9 for v in out):
            out.append(x)
    return out


def grid_kl_projection(polytope: OccupationPolytope, q, levels: int = 40, points: int = 21,
                       starts: int = 4, seed: int = 0):
    """``argmin KL(rho, q)`` over the unshrunk polytope by zoomed grid search.

    Works in nullspace coordinates ``rho = x0 + Z z`` of an equality basis and
    repeatedly refines a grid around the best point; meant for nullspace
    dimension at most 3.
    """
    q = np.asarray(q, dtype=float)
    A, b = _eq_rows(polytope)
    x0 = np.linalg.lstsq(A, b, rcond=None)[0]
    _, s, vt = np.linalg.svd(A)
    Z = vt[int(np.sum(s > 1e-10)):].T
    k = Z.shape[1]
    if k > 3:
        raise ValueError("grid oracle limited to nullspace dimension 3")

    def obj(zs):
        rho = x0[None, :] + zs @ Z.T
        bad = (rho < 0).any(axis=1)
        rho = np.clip(rho, 1e-300, None)
        val = np.sum(np.where(rho > 1e-300, rho * np.log(rho / q), 0.0), axis=1)
        val[bad] = np.inf
        return val

    rng = np.random.default_rng(seed)
    best_z, best_v = None, np.inf
    # the polytope lies in the unit box, so z lies in a ball of radius ~ sqrt(D)
    radius0 = np.sqrt(polytope.dim)
    for s_ in range(starts):
        centre = np.zeros(k) if s_ == 0 else rng.uniform(-0.5, 0.5, k) * radius0
        radius = radius0
        for _ in range(levels):
            axes = [np.linspace(c - radius, c + radius, points) for c in centre]
            grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
            vals = obj(grid)
            j = int(np.argmin(vals))
            if np.isfinite(vals[j]):
                centre = grid[j]
            radius *= 0.6
        v = obj(centre[None, :])[0]
        if v < best_v:
            best_z, best_v = centre, v
    return x0 + Z @ best_z, best_v


def mc_occupation(chain, policy, T: int, seed: int = 0, s0: int = 0) -> np.ndarray:
    """Empirical state-action frequencies of one long trajectory."""
    rng = np.random.default_rng(seed)
    S, A = chain.n_states, chain.n_actions
    counts = np.zeros(S * A)
    s = s0
    for _ in range(T):
        a = rng.choice(A, p=policy[s])
        counts[s * A + a] += 1
        s = rng.choice(S, p=chain.transition[s, a])
    return counts / T


def joint_vs_product_l1(states: np.ndarray, sizes) -> float:
    """L1 distance between the empirical joint state law and the product of its marginals.

    ``states`` has shape (n, T).
    """
    n, T = states.shape
    flat = np.ravel_multi_index(tuple(states), tuple(sizes))
    joint = np.bincount(flat, minlength=int(np.prod(sizes))).reshape(sizes) / T
    prod = np.ones(())
    for i in range(n):
        marg = np.bincount(states[i], minlength=sizes[i]) / T
        prod = np.multiply.outer(prod, marg)
    return float(np.abs(joint - prod).sum())
