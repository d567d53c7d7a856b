import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import simplex_chain
from stochgame_da.game import (GameConfig, PlayerChain, TabularReward, random_game, simulate,
                               zero_sum_two_player)
from stochgame_da.lp import solve_lp
from stochgame_da.metrics import (GapAccumulator, averaged_ni_gap, best_response_value,
                                  check_constant_sum, exact_gradient, exact_payoff, ni_gap,
                                  stable_residual)
from stochgame_da.occupancy import (build_polytope, occupation_from_policy,
                                    policy_from_occupation, shrink)
from stochgame_da.oracles import polytope_vertices


def _random_profile(game, rng):
    return [occupation_from_policy(c, rng.dirichlet(np.ones(c.n_actions), size=c.n_states))
            for c in game.chains]


def _matrix_game(r1, r2=None):
    r1 = np.asarray(r1, dtype=float)
    r2 = 1.0 - r1 if r2 is None else np.asarray(r2, dtype=float)
    A1, A2 = r1.shape
    chains = [simplex_chain(A1), simplex_chain(A2)]
    return GameConfig(chains, TabularReward(np.stack([r1, r2]), [(1, A1), (1, A2)]))


def test_gradient_identity_matrix():
    g = _matrix_game(np.eye(2))
    v = exact_gradient(g, [np.array([0.5, 0.5]), np.array([0.3, 0.7])], 0)
    assert np.allclose(v, [0.3, 0.7])


def test_constant_reward_gradient_and_payoff(rng):
    base = random_game(2, [2, 3], [2, 2], seed=0)
    const = GameConfig(base.chains, TabularReward(np.full((2, 4, 6), 0.4), [(2, 2), (3, 2)]))
    rhos = _random_profile(const, rng)
    assert np.allclose(exact_gradient(const, rhos, 0), 0.4)
    assert exact_payoff(const, rhos, 1) == pytest.approx(0.4, abs=1e-14)
    polys = [build_polytope(c) for c in const.chains]
    assert abs(ni_gap(const, rhos, polys)) <= 1e-9
    traj = [rhos, _random_profile(const, rng)]
    assert abs(stable_residual(const, traj, [0.5, 0.5], _random_profile(const, rng))) <= 1e-12


@given(st.integers(0, 10_000))
def test_multilinearity_three_players(seed):
    rng = np.random.default_rng(seed)
    g = random_game(3, [2, 1, 2], [2, 3, 2], seed=seed)
    rhos = _random_profile(g, rng)
    table = g.reward_table()
    # triple loop payoff
    direct = [0.0, 0.0, 0.0]
    for x in itertools.product(*(range(d) for d in g.dims)):
        w = rhos[0][x[0]] * rhos[1][x[1]] * rhos[2][x[2]]
        for i in range(3):
            direct[i] += w * table[(i,) + x]
    for i in range(3):
        v = exact_gradient(g, rhos, i)
        assert abs(rhos[i] @ v - exact_payoff(g, rhos, i)) <= 1e-12
        assert abs(direct[i] - exact_payoff(g, rhos, i)) <= 1e-12


@given(st.integers(0, 10_000), st.floats(1e-4, 1e-2))
def test_directional_derivative(seed, h):
    rng = np.random.default_rng(seed)
    g = random_game(2, [2, 2], [2, 2], seed=seed)
    rhos = _random_profile(g, rng)
    theta = _random_profile(g, rng)[0]
    moved = [rhos[0] + h * (theta - rhos[0]), rhos[1]]
    fd = (exact_payoff(g, moved, 0) - exact_payoff(g, rhos, 0)) / h
    assert fd == pytest.approx(exact_gradient(g, rhos, 0) @ (theta - rhos[0]), abs=1e-6)


def test_constant_sum_payoffs(rng):
    g = zero_sum_two_player([2, 2], [2, 3], seed=1)
    assert check_constant_sum(g) == pytest.approx(1.0)
    assert check_constant_sum(random_game(2, [2, 2], [2, 2], seed=0)) is None
    for _ in range(20):
        rhos = _random_profile(g, rng)
        assert exact_payoff(g, rhos, 0) + exact_payoff(g, rhos, 1) == pytest.approx(1.0, abs=1e-12)


def test_payoff_matches_simulation():
    g = random_game(2, [2, 3], [2, 2], seed=3)
    pols = [np.array([[0.2, 0.8], [0.6, 0.4]]), np.array([[0.5, 0.5], [0.1, 0.9], [0.7, 0.3]])]
    rhos = [occupation_from_policy(c, p) for c, p in zip(g.chains, pols)]
    _, _, r = simulate(g, pols, 1_000_000, g.streams(2))
    for i in range(2):
        assert r[i].mean() == pytest.approx(exact_payoff(g, rhos, i), abs=0.01)


def test_best_response_simplex_cases():
    v, th = best_response_value(build_polytope(simplex_chain(3)), np.array([1.0, 0, 0]))
    assert v == pytest.approx(1.0) and np.allclose(th, [1, 0, 0])
    v, th = best_response_value(shrink(build_polytope(simplex_chain(2)), 0.1), np.array([1.0, 0]))
    assert v == pytest.approx(0.9) and np.allclose(th, [0.9, 0.1])


def test_best_response_matches_vertices():
    rng = np.random.default_rng(4)
    for k in range(40):
        S, A = [(2, 2), (3, 2), (2, 3)][k % 3]
        base = build_polytope(random_game(1, [S], [A], seed=k).chains[0])
        poly = shrink(base, rng.uniform(0, 0.8) * base.margin)
        c = rng.normal(size=poly.dim)
        v, theta, res = best_response_value(poly, c, return_result=True)
        assert v == pytest.approx(max(c @ x for x in polytope_vertices(poly)), abs=1e-9)
        assert abs(res.duality_gap) <= 1e-9 and poly.contains(theta)


def test_matching_pennies_uniform_has_zero_gap():
    g = _matrix_game([[1.0, 0.0], [0.0, 1.0]])
    polys = [build_polytope(c) for c in g.chains]
    u = [np.full(2, 0.5), np.full(2, 0.5)]
    assert abs(ni_gap(g, u, polys)) <= 1e-9
    assert ni_gap(g, [np.array([1.0, 0]), np.full(2, 0.5)], polys) > 0.1


@given(st.integers(0, 10_000))
def test_gap_nonnegative(seed):
    rng = np.random.default_rng(seed)
    g = random_game(2, [2, 2], [2, 2], seed=seed)
    polys = [build_polytope(c) for c in g.chains]
    assert ni_gap(g, _random_profile(g, rng), polys) >= -1e-9


def test_constant_sum_equilibrium_by_lp():
    # NE of a 3x2 zero-sum matrix game from the row player's maximin LP
    M = np.array([[0.9, 0.2], [0.3, 0.8], [0.5, 0.5]])
    g = _matrix_game(M)
    # variables x (3), t split as t+ - t- ; slack per column
    # max t s.t. M^T x >= t, sum x = 1  ->  M^T x - t - s = 0
    A = np.zeros((3, 3 + 2 + 2))
    A[:2, :3] = M.T
    A[:2, 3], A[:2, 4] = -1, 1
    A[0, 5] = A[1, 6] = -1
    A[2, :3] = 1
    res = solve_lp(np.array([0, 0, 0, 1, -1, 0, 0.0]), A, np.array([0, 0, 1.0]))
    x = res.x[:3]
    # column player's minimax: min s s.t. M y <= s
    B = np.zeros((4, 2 + 2 + 3))
    B[:3, :2] = M
    B[:3, 2], B[:3, 3] = -1, 1
    B[0, 4] = B[1, 5] = B[2, 6] = 1
    B[3, :2] = 1
    res2 = solve_lp(np.array([0, 0, -1, 1, 0, 0, 0.0]), B, np.array([0, 0, 0, 1.0]))
    y = res2.x[:2]
    polys = [build_polytope(c) for c in g.chains]
    assert abs(ni_gap(g, [x, y], polys)) <= 1e-9


def test_averaged_gap_cases(rng):
    g = random_game(2, [2, 2], [2, 2], seed=2)
    polys = [shrink(build_polytope(c), 0.01) for c in g.chains]
    rho = _random_profile(g, rng)
    assert averaged_ni_gap(g, [rho], [0.3], polys) == pytest.approx(ni_gap(g, rho, polys), abs=1e-12)
    assert averaged_ni_gap(g, [rho] * 4, [1, .5, .2, .1], polys) == pytest.approx(ni_gap(g, rho, polys), abs=1e-12)
    # independent path: explicit averaged objective, then one LP per player
    r2 = _random_profile(g, rng)
    table = g.reward_table()
    total = 0.0
    for i in range(2):
        obj = 0.5 * exact_gradient(g, rho, i, table) + 0.5 * exact_gradient(g, r2, i, table)
        pay = 0.5 * exact_payoff(g, rho, i) + 0.5 * exact_payoff(g, r2, i)
        total += max(obj @ x for x in polytope_vertices(polys[i])) - pay
    assert averaged_ni_gap(g, [rho, r2], [0.5, 0.5], polys) == pytest.approx(total, abs=1e-10)


def test_gap_accumulator_incremental(rng):
    g = random_game(2, [2, 3], [2, 2], seed=8)
    polys = [build_polytope(c) for c in g.chains]
    acc = GapAccumulator(g)
    traj, w = [], []
    for k in range(6):
        r = _random_profile(g, rng)
        acc.add(r, 1 / (k + 1))
        traj.append(r)
        w.append(1 / (k + 1))
    assert acc.gap(polys) == pytest.approx(averaged_ni_gap(g, traj, w, polys), abs=1e-12)


def test_stable_residual_fixed_point(rng):
    g = random_game(2, [2, 2], [2, 2], seed=5)
    rho = _random_profile(g, rng)
    assert abs(stable_residual(g, [rho, rho], [0.7, 0.3], rho)) <= 1e-15
