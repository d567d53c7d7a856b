"""Occupation measures of a single player's chain.

Vectors over state-action pairs use the flat index ``s * |A| + a``.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DeltaSearchFailed, EmptyShrunkPolytope, NonErgodic
from .game import PlayerChain
from .lp import independent_rows, solve_lp

DENSE_MAX_STATES = 64
DELTA_GRID = 40


class ZeroOccupationWarning(UserWarning):
    """A state has zero occupation mass; its policy row fell back to uniform."""


@dataclass(frozen=True, eq=False)
class OccupationPolytope:
    """``{rho >= delta : A_eq rho = b_eq}`` with flow rows then the normalisation row."""

    A_eq: np.ndarray
    b_eq: np.ndarray
    n_states: int
    n_actions: int
    delta: float = 0.0
    # feasible point maximising the uniform floor, and that floor
    center: np.ndarray = field(default=None, repr=False)
    margin: float = 0.0
    # orthonormal nullspace basis of A_eq and min-norm particular solution
    Z: np.ndarray = field(default=None, repr=False)
    x0: np.ndarray = field(default=None, repr=False)
    rows: np.ndarray = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.n_states * self.n_actions

    def residual(self, rho: np.ndarray) -> float:
        """Max violation of the equalities and the lower bound."""
        eq = np.abs(self.A_eq @ rho - self.b_eq).max()
        return float(max(eq, max(0.0, self.delta - rho.min())))

    def contains(self, rho, tol=1e-8) -> bool:
        return self.residual(np.asarray(rho, dtype=float)) <= tol


def build_polytope(chain: PlayerChain) -> OccupationPolytope:
    S, A = chain.n_states, chain.n_actions
    P = chain.transition.reshape(S * A, S)  # row (s,a) -> next-state distribution
    own = np.repeat(np.eye(S), A, axis=0)    # indicator 1{s = s'}
    flow = (P - own).T
    A_eq = np.vstack([flow, np.ones((1, S * A))])
    b_eq = np.zeros(S + 1)
    b_eq[-1] = 1.0
    rows = independent_rows(A_eq)
    _, sv, vt = np.linalg.svd(A_eq[rows])
    Z = vt[len(rows):].T
    x0 = np.linalg.lstsq(A_eq, b_eq, rcond=None)[0]
    center, margin = _max_floor_point(A_eq, b_eq)
    for arr in (A_eq, b_eq, Z, x0, center):
        arr.setflags(write=False)
    return OccupationPolytope(A_eq, b_eq, S, A, 0.0, center, margin, Z, x0, rows)


def _max_floor_point(A_eq, b_eq):
    """LP: maximise t subject to rho = x + t*1 feasible, x >= 0."""
    D = A_eq.shape[1]
    A = np.hstack([A_eq, (A_eq @ np.ones(D))[:, None]])
    c = np.zeros(D + 1)
    c[-1] = 1.0
    res = solve_lp(c, A, b_eq)
    t = res.x[-1]
    return res.x[:D] + t, float(t)


def shrink(polytope: OccupationPolytope, delta: float, player=None) -> OccupationPolytope:
    """Same equalities with every coordinate bounded below by ``delta``."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if delta == 0:
        return replace(polytope, delta=0.0)
    if delta * polytope.dim >= 1.0 or polytope.margin < delta:
        raise EmptyShrunkPolytope(delta, player, polytope.margin)
    return replace(polytope, delta=float(delta))


def policy_from_occupation(rho, n_states: int, n_actions: int) -> np.ndarray:
    """``pi(a|s) = rho(s,a) / sum_a' rho(s,a')``; zero rows become uniform with a warning."""
    r = np.asarray(rho, dtype=float).reshape(n_states, n_actions)
    mass = r.sum(axis=1, keepdims=True)
    zero = mass[:, 0] <= 0
    pi = np.divide(r, mass, out=np.full_like(r, 1.0 / n_actions), where=mass > 0)
    if zero.any():
        warnings.warn(f"states {np.flatnonzero(zero).tolist()} have zero occupation; "
                      "using uniform rows", ZeroOccupationWarning, stacklevel=2)
    pi = np.maximum(pi, 0.0)
    return pi / pi.sum(axis=1, keepdims=True)


def stationary_distribution(kernel) -> np.ndarray:
    """Unique invariant distribution of a stochastic matrix.

    Dense solve for small chains, power iteration on the lazy chain otherwise.
    Raises :class:`NonErgodic` when the invariant distribution is not unique.
    """
    P = np.asarray(kernel, dtype=float)
    S = P.shape[0]
    M = P.T - np.eye(S)
    sv = np.linalg.svd(M, compute_uv=False)
    if S > 1 and sv[-2] <= 1e-10 * max(1.0, sv[0]):
        raise NonErgodic("kernel has more than one recurrent class")
    if S <= DENSE_MAX_STATES:
        lhs = np.vstack([M, np.ones((1, S))])
        rhs = np.zeros(S + 1)
        rhs[-1] = 1.0
        nu = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
    else:
        lazy = 0.5 * (P + np.eye(S))
        nu = np.full(S, 1.0 / S)
        for _ in range(10**6):
            nxt = nu @ lazy
            if np.abs(nxt - nu).sum() <= 1e-12:
                nu = nxt
                break
            nu = nxt
    nu = np.maximum(nu, 0.0)
    nu /= nu.sum()
    if np.abs(nu @ P - nu).sum() > 1e-10:
        # one refinement sweep cleans up dense-solve roundoff
        nu = nu @ P
        nu /= nu.sum()
        if np.abs(nu @ P - nu).sum() > 1e-10:
            raise NonErgodic("stationary residual above 1e-10")
    return nu


def occupation_from_policy(chain: PlayerChain, policy) -> np.ndarray:
    """``rho(s,a) = nu(s) pi(a|s)`` with nu stationary for the induced chain."""
    policy = np.asarray(policy, dtype=float)
    nu = stationary_distribution(chain.induced_kernel(policy))
    return (nu[:, None] * policy).ravel()


# ---------------------------------------------------------------- mixing


def dobrushin(kernel: np.ndarray) -> float:
    """One-step total-variation contraction ``max_{s,s'} ||P(s,.) - P(s',.)||_1 / 2``."""
    K = np.asarray(kernel)
    diff = np.abs(K[:, None, :] - K[None, :, :]).sum(axis=2)
    return 0.5 * float(diff.max())


def contraction_time(kernel: np.ndarray, max_power: int = 2**20) -> float:
    """Time constant tau with contraction ``exp(-1/tau)`` per step.

    Uses the m-step coefficient for m = 1, 2, 4, ... up to ``max_power`` and
    keeps the best per-step rate ``-m / ln c_m``; floors the answer at 1.
    """
    K = np.asarray(kernel, dtype=float)
    best = np.inf
    Km, m = K.copy(), 1
    while m <= max_power:
        c = dobrushin(Km)
        if c <= 0.0:
            best = 0.0
            break
        if c < 1.0 - 1e-12:
            best = min(best, -m / np.log(c))
            if c < 1e-6:
                break
        Km = Km @ Km
        m *= 2
    if not np.isfinite(best):
        raise NonErgodic("induced chain does not contract")
    return max(1.0, best)


def mixing_time_bound(chain: PlayerChain, n_samples: int = 200, delta: float = 0.0,
                      seed: int = 0):
    """Largest contraction time over random interior policies.

    With ``delta = 0`` policies are Dirichlet(1) rows.  With ``delta > 0`` every
    other sample is instead the policy of a random point of the shrunk
    polytope (a projected Gaussian direction at a log-uniform scale), which
    reaches its corners.  Samples are drawn one at a time, so a larger
    ``n_samples`` with the same seed is a superset.  Returns
    ``(tau_hat, policy attaining it)``.
    """
    from .projection import euclidean_project

    rng = np.random.default_rng(seed)
    S, A = chain.n_states, chain.n_actions
    shrunk = shrink(build_polytope(chain), delta) if delta > 0 else None
    worst, arg = -np.inf, None
    for k in range(n_samples):
        if shrunk is not None and k % 2 == 1:
            y = rng.normal(size=chain.dim) * 10.0 ** rng.uniform(-2, 2)
            pi = policy_from_occupation(euclidean_project(shrunk, y), S, A)
        else:
            pi = rng.dirichlet(np.ones(A), size=S)
        K = chain.induced_kernel(pi)
        stationary_distribution(K)
        tau = contraction_time(K)
        if tau > worst:
            worst, arg = tau, pi
    return float(worst), arg


# ---------------------------------------------------------------- delta choice


def deterministic_vertices(chain: PlayerChain, max_vertices: int = 4096) -> np.ndarray:
    """Occupation measures of all deterministic policies (the polytope's vertices for ergodic chains)."""
    S, A = chain.n_states, chain.n_actions
    count = A**S
    if count > max_vertices:
        raise DeltaSearchFailed(
            f"{count} deterministic policies exceed the vertex budget {max_vertices}; "
            "pass an explicit delta override")
    out = []
    for choice in itertools.product(range(A), repeat=S):
        pi = np.zeros((S, A))
        pi[np.arange(S), choice] = 1.0
        out.append(occupation_from_policy(chain, pi))
    return np.unique(np.round(np.array(out), 14), axis=0)


def compute_delta(chain: PlayerChain, epsilon: float, override: float | None = None,
                  max_vertices: int = 4096, player=None) -> float:
    """Largest grid delta whose shrunk polytope stays within ``epsilon/sqrt(|S||A|)`` of every vertex.

    The grid is ``2**-k / (|S||A|)`` for k = 1..40.  ``override`` bypasses the
    search (after a feasibility check), e.g. ``1 / (20 |S||A|)``.
    """
    from .projection import euclidean_project

    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    poly = build_polytope(chain)
    if override is not None:
        shrink(poly, override, player)
        return float(override)
    D = poly.dim
    radius = epsilon / np.sqrt(D)
    verts = deterministic_vertices(chain, max_vertices)
    for k in range(1, DELTA_GRID + 1):
        delta = 2.0**-k / D
        if delta > poly.margin or delta * D >= 1:
            continue
        sp = shrink(poly, delta, player)
        far = max(np.linalg.norm(v - euclidean_project(sp, v)) for v in verts)
        if far <= radius:
            return float(delta)
    raise DeltaSearchFailed(f"no delta on the grid meets distance {radius:.3g}; "
                            "use a larger epsilon")


def fraction_delta(chain: PlayerChain, factor: float = 20.0) -> float:
    """Fixed floor ``1 / (factor |S||A|)``; factor 20 gives 7.8125e-4 on an 8x8 chain."""
    return 1.0 / (factor * chain.dim)
