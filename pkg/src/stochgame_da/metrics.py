"""Exact payoff oracles and equilibrium diagnostics for small games."""

from __future__ import annotations

import numpy as np

from .errors import GameInputError
from .game import GameConfig
from .lp import solve_lp
from .occupancy import OccupationPolytope


def _contract_all_but(table_i: np.ndarray, rhos, keep: int | None) -> np.ndarray:
    """Contract player axes of ``table_i`` with the occupation vectors, except ``keep``."""
    out = table_i
    # contract from the last axis down so axis numbers stay valid
    for j in reversed(range(len(rhos))):
        if j == keep:
            continue
        out = np.tensordot(out, rhos[j], axes=([j], [0]))
    return out


def exact_gradient(game: GameConfig, rhos, i: int, table=None) -> np.ndarray:
    """``v_i(rho_-i)[(s_i, a_i)] = sum over others of prod_j rho_j * r_i``."""
    table = game.reward_table() if table is None else table
    return _contract_all_but(table[i], [np.asarray(r, dtype=float) for r in rhos], i)


def all_gradients(game: GameConfig, rhos, table=None) -> list:
    table = game.reward_table() if table is None else table
    return [exact_gradient(game, rhos, i, table) for i in range(game.n)]


def exact_payoff(game: GameConfig, rhos, i: int, table=None) -> float:
    table = game.reward_table() if table is None else table
    return float(_contract_all_but(table[i], [np.asarray(r, dtype=float) for r in rhos], None))


def best_response_value(polytope: OccupationPolytope, g, return_result: bool = False):
    """``max <theta, g>`` over the (shrunk) polytope via the simplex method.

    Returns ``(value, theta)``; with ``return_result`` the LP result (basis,
    duals, duality gap) is appended for audit.
    """
    g = np.asarray(g, dtype=float)
    delta = polytope.delta
    b = polytope.b_eq - delta * polytope.A_eq.sum(axis=1)
    res = solve_lp(g, polytope.A_eq, b)
    theta = res.x + delta
    value = res.value + delta * g.sum()
    if return_result:
        return value, theta, res
    return value, theta


def ni_gap(game: GameConfig, rhos, polytopes, table=None) -> float:
    """``max_theta Psi(theta, rho) = sum_i [max_theta_i <v_i, theta_i> - <rho_i, v_i>]``."""
    table = game.reward_table() if table is None else table
    total = 0.0
    for i in range(game.n):
        v = exact_gradient(game, rhos, i, table)
        total += best_response_value(polytopes[i], v)[0] - float(np.dot(rhos[i], v))
    return total


class GapAccumulator:
    """Running weighted sums for the averaged Nikaido-Isoda gap.

    Keeps ``sum_l eta_l v_i(rho^l)`` and ``sum_l eta_l <rho_i^l, v_i(rho^l)>``
    so the gap at any k costs one LP per player.
    """

    def __init__(self, game: GameConfig, table=None):
        self.game = game
        self.table = game.reward_table() if table is None else table
        self.grad = [np.zeros(d) for d in game.dims]
        self.pay = np.zeros(game.n)
        self.weight = 0.0

    def add(self, rhos, eta: float):
        for i in range(self.game.n):
            v = exact_gradient(self.game, rhos, i, self.table)
            self.grad[i] += eta * v
            self.pay[i] += eta * float(np.dot(rhos[i], v))
        self.weight += eta

    def gap(self, polytopes) -> float:
        w = self.weight
        return sum(best_response_value(polytopes[i], self.grad[i] / w)[0] - self.pay[i] / w
                   for i in range(self.game.n))


def averaged_ni_gap(game: GameConfig, trajectory, weights, polytopes, table=None) -> float:
    """``max_theta sum_l (eta_l / w) Psi(theta, rho^l)`` for a list of profiles."""
    if len(trajectory) == 0 or len(trajectory) != len(weights):
        raise GameInputError("trajectory and weights must be nonempty and of equal length")
    acc = GapAccumulator(game, table)
    for rhos, eta in zip(trajectory, weights):
        acc.add(rhos, float(eta))
    return acc.gap(polytopes)


def stable_residual(game: GameConfig, trajectory, weights, rho_star, table=None) -> float:
    """``d(k) = sum_l (eta_l / w) <v(rho^l), rho* - rho^l>`` summed over players."""
    table = game.reward_table() if table is None else table
    w = float(np.sum(weights))
    total = 0.0
    for rhos, eta in zip(trajectory, weights):
        for i in range(game.n):
            v = exact_gradient(game, rhos, i, table)
            total += eta / w * float(np.dot(v, np.asarray(rho_star[i]) - rhos[i]))
    return total


def check_constant_sum(game: GameConfig, tol: float = 1e-9):
    """Return c if ``sum_i r_i(s, a) == c`` everywhere (unit weights), else None."""
    total = game.reward_table().sum(axis=0)
    lo, hi = float(total.min()), float(total.max())
    if hi - lo <= tol:
        return 0.5 * (lo + hi)
    return None


def estimator_bias_report(game: GameConfig, policies, d_values, N: int, seed: int = 0,
                          tau: float | None = None):
    """Monte-Carlo bias of the batch gradient estimator for each burn-in d.

    Runs ``N`` consecutive batches per d under fixed policies and compares the
    mean estimate with the exact gradient at the policies' occupation measures.
    Returns a list of dict rows, one per (d, player, coordinate).
    """
    from .learner import run_batch
    from .occupancy import mixing_time_bound, occupation_from_policy

    if N <= 0:
        raise GameInputError("need at least one batch per d")
    rhos = [occupation_from_policy(c, p) for c, p in zip(game.chains, policies)]
    table = game.reward_table()
    exact = all_gradients(game, rhos, table)
    if tau is None:
        tau = max(mixing_time_bound(c)[0] for c in game.chains)
    rows = []
    for d in d_values:
        streams = game.streams(seed + int(d))
        joint = np.zeros(game.n, dtype=int)
        s1 = [np.zeros(dim) for dim in game.dims]
        s2 = [np.zeros(dim) for dim in game.dims]
        for _ in range(N):
            out = run_batch(game, policies, d, streams, joint)
            joint = out.next_state
            for i in range(game.n):
                s1[i] += out.R[i]
                s2[i] += out.R[i] ** 2
        bound = float(np.exp(-d / tau))
        for i in range(game.n):
            mean = s1[i] / N
            var = np.maximum(s2[i] / N - mean**2, 0.0)
            se = np.sqrt(var / max(N - 1, 1))
            for k in range(len(mean)):
                bias = float(mean[k] - exact[i][k])
                rows.append({"d": int(d), "player": i, "coord": k, "mean": float(mean[k]),
                             "exact": float(exact[i][k]), "bias": bias, "se": float(se[k]),
                             "bound": bound, "tau": float(tau),
                             "ok": abs(bias) <= bound + 3 * se[k]})
    return rows
