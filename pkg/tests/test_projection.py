import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import simplex_chain
from stochgame_da.errors import GameInputError
from stochgame_da.game import random_game
from stochgame_da.occupancy import build_polytope, occupation_from_policy, shrink
from stochgame_da.oracles import brute_force_projection, grid_kl_projection
from stochgame_da.projection import (Regularizer, da_argmax, euclidean_project, kkt_residual,
                                     kl_divergence, kl_project, kl_simplex_step)


def _poly(seed, S=3, A=2, frac=0.3):
    base = build_polytope(random_game(1, [S], [A], seed=seed).chains[0])
    return base, shrink(base, frac * base.margin)


def test_projection_idempotent_on_feasible():
    base, poly = _poly(0)
    rho = euclidean_project(poly, np.random.default_rng(0).normal(size=poly.dim))
    assert np.allclose(euclidean_project(poly, rho), rho, atol=1e-12)
    inside = poly.center
    assert np.allclose(euclidean_project(poly, inside), inside, atol=1e-12)


def test_projection_onto_segment():
    poly = build_polytope(simplex_chain(2))
    assert np.allclose(euclidean_project(poly, np.array([2.0, 0.0])), [1.0, 0.0], atol=1e-14)


def test_projection_matches_brute_force():
    rng = np.random.default_rng(3)
    _, poly = _poly(21, 3, 2)
    for _ in range(100):
        y = rng.normal(size=poly.dim) * rng.choice([0.1, 1, 10])
        a = euclidean_project(poly, y)
        assert np.abs(a - brute_force_projection(poly, y)).max() <= 1e-7


@given(st.integers(0, 10_000))
def test_projection_feasible_and_kkt(seed):
    rng = np.random.default_rng(seed)
    _, poly = _poly(seed % 200, 1 + seed % 4, 1 + seed % 3, frac=rng.uniform(0, 0.9))
    y = rng.normal(size=poly.dim) * 5
    rho, info = euclidean_project(poly, y, return_info=True)
    assert poly.residual(rho) <= 1e-8 and rho.min() >= poly.delta - 1e-12
    assert info.kkt_residual <= 1e-8
    assert kkt_residual(poly, rho, y) <= 1e-8


def test_projection_nonexpansive():
    rng = np.random.default_rng(5)
    _, poly = _poly(2, 4, 3)
    for _ in range(500):
        y1, y2 = rng.normal(size=(2, poly.dim))
        p1, p2 = euclidean_project(poly, y1), euclidean_project(poly, y2)
        assert np.linalg.norm(p1 - p2) <= np.linalg.norm(y1 - y2) + 1e-9


def test_warm_start_same_answer():
    rng = np.random.default_rng(8)
    _, poly = _poly(4, 3, 3)
    rho, info = euclidean_project(poly, rng.normal(size=poly.dim), return_info=True)
    for _ in range(30):
        y = rng.normal(size=poly.dim)
        warm, info = euclidean_project(poly, y, start=rho, working=info.working, return_info=True)
        cold = euclidean_project(poly, y)
        assert np.abs(warm - cold).max() <= 1e-10
        rho = warm


def test_da_argmax_cases():
    base, poly = _poly(6)
    reg = Regularizer("quadratic", 0.7)
    rho_star = poly.center
    assert np.allclose(da_argmax(poly, 2 * reg.coef * rho_star, reg), rho_star, atol=1e-12)
    zero = da_argmax(poly, np.zeros(poly.dim), reg)
    assert np.allclose(zero, euclidean_project(poly, np.zeros(poly.dim)), atol=1e-14)
    with pytest.raises(ValueError):
        da_argmax(poly, np.zeros(poly.dim), Regularizer("entropy", 1.0))


@given(st.integers(0, 10_000), st.floats(0.01, 100))
def test_da_argmax_joint_scaling(seed, t):
    _, poly = _poly(seed % 100)
    Y = np.random.default_rng(seed).normal(size=poly.dim)
    a = da_argmax(poly, Y, Regularizer("quadratic", 0.5))
    b = da_argmax(poly, t * Y, Regularizer("quadratic", 0.5 * t))
    assert np.abs(a - b).max() <= 1e-9


def test_kl_simplex_step_cases():
    rho = np.array([0.1, 0.2, 0.7])
    assert np.allclose(kl_simplex_step(rho, np.zeros(3)), rho, atol=1e-15)
    assert np.allclose(kl_simplex_step(np.array([.5, .5]), np.array([np.log(2), 0])), [2 / 3, 1 / 3])
    g = np.array([0.3, -1.0, 2.0])
    assert np.allclose(kl_simplex_step(rho, g), kl_simplex_step(rho, g + 17.0), atol=1e-15)
    with pytest.raises(GameInputError):
        kl_simplex_step(np.array([0.0, 1.0]), np.zeros(2))


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=12), st.integers(0, 1000))
def test_kl_simplex_step_positive_normalised(g, seed):
    rho = np.random.default_rng(seed).dirichlet(np.ones(len(g)))
    out = kl_simplex_step(rho, np.array(g))
    assert out.min() > 0 or np.ptp(g) > 600
    assert abs(out.sum() - 1) <= 1e-12


def test_kl_project_cases():
    base, _ = _poly(9, 2, 2)
    chain = random_game(1, [2], [2], seed=9).chains[0]
    q = occupation_from_policy(chain, np.array([[0.3, 0.7], [0.6, 0.4]]))
    assert np.allclose(kl_project(base, q), q, atol=1e-12)
    simplex = build_polytope(simplex_chain(4))
    raw = np.array([1.0, 2.0, 3.0, 4.0])
    assert np.allclose(kl_project(simplex, raw), raw / raw.sum(), atol=1e-14)


def test_kl_project_matches_grid_oracle():
    rng = np.random.default_rng(10)
    for k in range(50):
        base = build_polytope(random_game(1, [2], [2], seed=300 + k).chains[0])
        q = rng.dirichlet(np.ones(4))
        r = kl_project(base, q)
        _, v = grid_kl_projection(base, q)
        assert kl_divergence(r, q) <= v + 1e-6
        assert base.residual(r) <= 1e-8


def test_kl_pythagorean_inequality():
    rng = np.random.default_rng(11)
    chain = random_game(1, [3], [2], seed=1).chains[0]
    base = build_polytope(chain)
    q = rng.dirichlet(np.ones(base.dim))
    r = kl_project(base, q)
    for _ in range(100):
        p = occupation_from_policy(chain, rng.dirichlet(np.ones(2), size=3))
        slack = kl_divergence(p, q) - kl_divergence(p, r) - kl_divergence(r, q)
        assert slack >= -1e-7


@given(st.integers(0, 10_000))
def test_md_descent_inequality(seed):
    rng = np.random.default_rng(seed)
    chain = random_game(1, [2], [3], seed=seed % 100).chains[0]
    base = build_polytope(chain)
    rho = occupation_from_policy(chain, rng.dirichlet(np.ones(3), size=2))
    z = occupation_from_policy(chain, rng.dirichlet(np.ones(3), size=2))
    g = -rng.uniform(0, 3, size=base.dim)
    nxt = kl_project(base, kl_simplex_step(rho, g))
    lhs = kl_divergence(z, nxt) - kl_divergence(z, rho)
    rhs = g @ (rho - z) + 0.5 * (g**2) @ rho
    assert lhs <= rhs + 1e-7


def test_regulariser_strong_convexity():
    assert Regularizer("quadratic", 1000).strong_convexity == 2000
    assert Regularizer("entropy").strong_convexity == 1
    with pytest.raises(ValueError):
        Regularizer("quadratic", -1)
