import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stochgame_da.errors import EnumerationTooLarge, GameInputError
from stochgame_da.game import (GameConfig, PlayerChain, Streams, TabularReward, game_from_spec,
                               random_game, sample_action, simulate, smart_grid_game,
                               smart_grid_reward, smart_grid_transition, step,
                               zero_sum_two_player)
from stochgame_da.metrics import exact_payoff
from stochgame_da.occupancy import occupation_from_policy
from stochgame_da.oracles import joint_vs_product_l1


def test_chain_rejects_bad_rows():
    with pytest.raises(GameInputError):
        PlayerChain(np.array([[[0.5, 0.6]], [[1.0, 0.0]]]))
    with pytest.raises(GameInputError):
        PlayerChain(np.array([[[1.5, -0.5]], [[1.0, 0.0]]]))
    with pytest.raises(GameInputError):
        PlayerChain(np.ones((2, 2, 3)) / 3)


def test_identity_chain_stays_put():
    game = GameConfig([PlayerChain(np.eye(3)[:, None, :].repeat(2, axis=1))],
                      TabularReward(np.zeros((1, 6)), [(3, 2)]))
    streams = game.streams(0)
    for s in range(3):
        for a in range(2):
            assert step(game, [s], [a], streams)[0] == s


def test_single_state_next_is_zero():
    game = random_game(3, [1, 1, 1], [2, 3, 2], seed=1)
    streams = game.streams(0)
    for _ in range(20):
        assert step(game, [0, 0, 0], [1, 2, 0], streams).tolist() == [0, 0, 0]


def test_uniform_chains_factorise():
    P = np.full((2, 1, 2), 0.5)
    game = GameConfig([PlayerChain(P), PlayerChain(P)], TabularReward(np.zeros((2, 2, 2)), [(2, 1)] * 2))
    states, _, _ = simulate(game, [np.ones((2, 1))] * 2, 100_000, game.streams(4))
    assert joint_vs_product_l1(states[:, :-1], [2, 2]) <= 0.02


@given(st.integers(0, 2**31 - 1))
def test_independence_factorisation_random_policies(seed):
    rng = np.random.default_rng(seed)
    game = random_game(2, [2, 2], [2, 2], seed=seed % 50)
    pols = [rng.dirichlet(np.ones(2), size=2) for _ in range(2)]
    states, _, _ = simulate(game, pols, 10_000, game.streams(seed))
    assert joint_vs_product_l1(states[:, :-1], [2, 2]) <= 0.05


def test_sample_action_deterministic_and_uniform():
    rng = np.random.default_rng(0)
    pol = np.array([[0.0, 1.0, 0.0]])
    assert all(sample_action(pol, 0, rng) == 1 for _ in range(100))
    uni = np.full((1, 8), 1 / 8)
    draws = np.array([sample_action(uni, 0, rng) for _ in range(200_000)])
    freq = np.bincount(draws, minlength=8) / len(draws)
    assert np.abs(freq - 1 / 8).max() <= 0.01


def test_uniform_eight_actions_million_draws():
    # the vectorised walk is the production sampler; check it on 1e6 draws
    from stochgame_da.game import walk_player
    chain = PlayerChain(np.ones((1, 8, 1)))
    _, a = walk_player(chain, np.full((1, 8), 1 / 8), 0, 1_000_000, np.random.default_rng(1))
    assert np.abs(np.bincount(a, minlength=8) / 1e6 - 1 / 8).max() <= 0.01


def test_sample_action_zero_row_errors():
    with pytest.raises(GameInputError):
        sample_action(np.array([[0.0, 0.0], [0.5, 0.5]]), 0, np.random.default_rng(0))


def test_smart_grid_shapes():
    g = smart_grid_game(2, C=7, lam=0.0)
    assert g.dims == [64, 64]
    assert all(c.n_states == 8 and c.n_actions == 8 for c in g.chains)
    g5 = smart_grid_game(5, C=7, lam=1.5)
    assert g5.n == 5 and g5.reward.lam == 1.5
    tiny = smart_grid_game(1, C=1, G=1)
    # g = 0 always: s' = (s - a)^+
    assert np.array_equal(tiny.chains[0].transition[:, :, :],
                          np.array([[[1, 0], [1, 0]], [[0, 1], [1, 0]]], dtype=float))


def test_smart_grid_transition_cases():
    assert np.allclose(smart_grid_transition(7, 4, 3, 5), [0.25] * 4 + [0] * 4)
    assert np.allclose(smart_grid_transition(7, 4, 7, 0), [0] * 7 + [1])
    # (s - a)^+ = 2, g in 0..3 -> s' in 2..5
    assert np.allclose(smart_grid_transition(7, 4, 5, 3), [0, 0, .25, .25, .25, .25, 0, 0])


@given(st.integers(1, 9), st.integers(1, 6), st.data())
def test_smart_grid_transition_rows_sum_to_one(C, G, data):
    s = data.draw(st.integers(0, C))
    a = data.draw(st.integers(0, C))
    row = smart_grid_transition(C, G, s, a)
    assert abs(row.sum() - 1) <= 1e-12 and row.min() >= 0


def test_smart_grid_reward_examples():
    assert smart_grid_reward(7, 0.0, [0, 0], [7, 3], 0) == 1.0
    assert smart_grid_reward(7, 0.0, [4, 4], [0, 3], 0) == 0.0
    assert smart_grid_reward(7, 1.5, [0, 0], [7, 7], 0) == 0.0
    # price 1.5 * 3 = 4.5, raw = 16 - 4.5 * 1 = 11.5
    assert smart_grid_reward(7, 1.5, [3, 5], [4, 7], 0) == pytest.approx(11.5 / 49)


@given(st.integers(1, 8), st.floats(0, 10), st.integers(1, 4), st.data())
def test_smart_grid_reward_in_unit_interval(C, lam, n, data):
    s = data.draw(st.lists(st.integers(0, C), min_size=n, max_size=n))
    a = data.draw(st.lists(st.integers(0, C), min_size=n, max_size=n))
    for i in range(n):
        r = smart_grid_reward(C, lam, s, a, i)
        assert 0.0 <= r <= 1.0


def test_smart_grid_vectorised_reward_matches_scalar():
    g = smart_grid_game(3, C=4, G=2, lam=0.7)
    rng = np.random.default_rng(0)
    s = rng.integers(0, 5, (3, 50))
    a = rng.integers(0, 5, (3, 50))
    r = g.reward.evaluate(s, a)
    for t in range(50):
        for i in range(3):
            assert r[i, t] == pytest.approx(smart_grid_reward(4, 0.7, s[:, t], a[:, t], i), abs=1e-15)


def test_random_game_deterministic():
    a, b = random_game(2, [3, 2], [2, 3], seed=9), random_game(2, [3, 2], [2, 3], seed=9)
    assert a.to_json() == b.to_json()
    assert a.digest() != random_game(2, [3, 2], [2, 3], seed=10).digest()


def test_random_game_induced_chains_primitive():
    g = random_game(2, [3, 4], [2, 3], seed=2)
    rng = np.random.default_rng(0)
    for c in g.chains:
        for _ in range(100):
            K = c.induced_kernel(rng.dirichlet(np.ones(c.n_actions), size=c.n_states))
            assert np.all(np.linalg.matrix_power(K, c.n_states) > 0)


@given(st.integers(0, 10_000))
def test_generated_rows_sum_to_one(seed):
    for g in (random_game(2, [3, 2], [2, 2], seed=seed), smart_grid_game(2, C=3, G=1 + seed % 4)):
        for c in g.chains:
            assert np.abs(c.transition.sum(axis=2) - 1).max() <= 1e-12


def test_single_state_game_is_matrix_game():
    g = random_game(2, [1, 1], [3, 2], seed=0)
    table = g.reward_table()
    assert table.shape == (2, 3, 2)
    x, y = np.array([0.2, 0.3, 0.5]), np.array([0.6, 0.4])
    assert exact_payoff(g, [x, y], 0) == pytest.approx(x @ table[0] @ y, abs=1e-14)


def test_zero_sum_construction(rng):
    g = zero_sum_two_player([2, 3], [2, 2], seed=4)
    assert np.allclose(g.reward_table().sum(axis=0), 1.0, atol=0)
    assert g.to_json() == zero_sum_two_player([2, 3], [2, 2], seed=4).to_json()
    for _ in range(10):
        rhos = [occupation_from_policy(c, rng.dirichlet(np.ones(c.n_actions), size=c.n_states))
                for c in g.chains]
        assert exact_payoff(g, rhos, 0) + exact_payoff(g, rhos, 1) == pytest.approx(1.0, abs=1e-12)


def test_step_reproducible_and_isolated():
    g = random_game(2, [3, 3], [2, 2], seed=0)
    a, b = g.streams(5), g.streams(5)
    js_a = js_b = np.zeros(2, dtype=int)
    for t in range(200):
        act = [t % 2, (t // 2) % 2]
        js_a = step(g, js_a, act, a)
        js_b = step(g, js_b, act, b)
        assert np.array_equal(js_a, js_b)
    # player 0's path does not depend on player 1's actions
    pols = [np.full((3, 2), .5), np.array([[1, 0], [0, 1], [.5, .5]])]
    s1, _, _ = simulate(g, pols, 500, g.streams(1))
    s2, _, _ = simulate(g, [pols[0], np.full((3, 2), .5)], 500, g.streams(1))
    assert np.array_equal(s1[0], s2[0])


def test_streams_state_roundtrip():
    s = Streams.from_seed(3, 2)
    s[0].random(5)
    doc = json.loads(json.dumps(s.get_state()))
    x = [s[0].random(), s[1].random(), s.nature.random()]
    s.set_state(doc)
    assert x == [s[0].random(), s[1].random(), s.nature.random()]


def test_game_json_roundtrip():
    for g in (smart_grid_game(2, C=3, lam=1.5), random_game(3, [2, 1, 2], [2, 2, 3], seed=1)):
        g2 = GameConfig.from_json(g.to_json())
        assert g2.digest() == g.digest()
        assert np.array_equal(g2.reward_table(), g.reward_table())


def test_enumeration_cap():
    g = smart_grid_game(5)
    with pytest.raises(EnumerationTooLarge):
        g.reward_table()


def test_game_from_spec_presets():
    assert game_from_spec({"preset": "smart_grid", "n": 2, "C": 3, "G": 2, "lambda": 1.0}).dims == [16, 16]
    assert game_from_spec({"preset": "zero_sum", "state_sizes": 2, "action_sizes": 2}).n == 2
    with pytest.raises(GameInputError):
        game_from_spec({"preset": "nope"})
