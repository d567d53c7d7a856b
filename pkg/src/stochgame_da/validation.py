"""Self-check suites run by ``stochgame validate``.

Each suite returns ``(ok, message)``.  ``fault`` names a suite whose
production output gets perturbed before comparison, to confirm the check
actually bites.
"""

from __future__ import annotations

import json
import tempfile
import time
from pathlib import Path

import numpy as np

FAULT_EPS = 1e-4


def suite_roundtrip(level: str, fault: str | None = None):
    from .game import GameConfig, random_game
    from .occupancy import occupation_from_policy, policy_from_occupation

    n = 40 if level == "fast" else 200
    rng = np.random.default_rng(0)
    worst = 0.0
    for k in range(n):
        g = random_game(1, [3], [3], seed=k)
        chain = g.chains[0]
        pi = rng.dirichlet(np.ones(3), size=3)
        rho = occupation_from_policy(chain, pi)
        back = occupation_from_policy(chain, policy_from_occupation(rho, 3, 3))
        if fault == "roundtrip":
            back = back + FAULT_EPS
        worst = max(worst, float(np.abs(back - rho).max()))
        g2 = GameConfig.from_json(g.to_json())
        if g2.digest() != g.digest():
            return False, f"game JSON roundtrip changed the digest (instance {k})"
    s = random_game(2, [2, 2], [2, 2], seed=0).streams(3)
    state = json.loads(json.dumps(s.get_state()))
    a = [r.random() for r in s.players]
    s.set_state(state)
    b = [r.random() for r in s.players]
    if a != b:
        return False, "RNG state roundtrip not exact"
    return worst <= 1e-7, f"policy/occupation roundtrip max error {worst:.2e} over {n} chains"


def suite_projection(level: str, fault: str | None = None):
    from .game import random_game
    from .occupancy import build_polytope, shrink
    from .oracles import brute_force_projection, grid_kl_projection
    from .projection import euclidean_project, kl_divergence, kl_project

    n = 20 if level == "fast" else 100
    rng = np.random.default_rng(1)
    e_worst, k_worst, pyth = 0.0, 0.0, np.inf
    for k in range(n):
        chain = random_game(1, [2], [2], seed=1000 + k).chains[0]
        base = build_polytope(chain)
        p = shrink(base, 0.3 * base.margin, 0)
        y = rng.normal(size=p.dim)
        rho = euclidean_project(p, y)
        if fault == "projection":
            rho = rho + FAULT_EPS
        e_worst = max(e_worst, float(np.abs(rho - brute_force_projection(p, y)).max()))
        q = rng.dirichlet(np.ones(p.dim))
        r = kl_project(base, q)
        _, v_or = grid_kl_projection(base, q, starts=1 if level == "fast" else 4)
        k_worst = max(k_worst, kl_divergence(r, q) - v_or)
        x = base.center
        pyth = min(pyth, kl_divergence(x, q) - kl_divergence(x, r) - kl_divergence(r, q))
    ok = e_worst <= 1e-7 and k_worst <= 1e-6 and pyth >= -1e-7
    return ok, (f"euclidean max dev {e_worst:.2e}, KL objective excess {k_worst:.2e}, "
                f"pythagorean slack {pyth:.2e} over {n} polytopes")


def suite_lp(level: str, fault: str | None = None):
    from .game import random_game
    from .metrics import best_response_value
    from .occupancy import build_polytope, shrink
    from .oracles import polytope_vertices

    n = 20 if level == "fast" else 100
    rng = np.random.default_rng(2)
    worst, cert = 0.0, 0.0
    for k in range(n):
        S, A = (2, 2) if k % 2 == 0 else (3, 2)
        chain = random_game(1, [S], [A], seed=2000 + k).chains[0]
        base = build_polytope(chain)
        p = shrink(base, 0.5 * base.margin, 0) if k % 3 else base
        c = rng.normal(size=p.dim)
        v, _, res = best_response_value(p, c, return_result=True)
        if fault == "lp":
            v += FAULT_EPS
        best = max(float(c @ x) for x in polytope_vertices(p))
        worst = max(worst, abs(v - best))
        cert = max(cert, abs(res.duality_gap))
    return worst <= 1e-9 and cert <= 1e-9, f"LP vs vertices {worst:.2e}, duality gap {cert:.2e} over {n} LPs"


def suite_bias(level: str, fault: str | None = None):
    from .game import random_game
    from .metrics import estimator_bias_report
    from .occupancy import mixing_time_bound

    game = random_game(2, [2, 2], [2, 2], seed=7)
    pols = [np.full((2, 2), 0.5), np.array([[0.3, 0.7], [0.6, 0.4]])]
    tau = max(mixing_time_bound(c)[0] for c in game.chains)
    d_values = [2, 8] if level == "fast" else [2, 4, 8, 16, 32]
    N = 4000 if level == "fast" else 100_000
    rows = estimator_bias_report(game, pols, d_values, N, seed=11, tau=tau)
    if fault == "bias":
        for r in rows:
            r["ok"] = abs(r["bias"] + 10 * r["se"] + 0.1) <= r["bound"] + 3 * r["se"]
    bad = [r for r in rows if not r["ok"]]
    worst = max(abs(r["bias"]) - r["bound"] - 3 * r["se"] for r in rows)
    return not bad, f"{len(rows) - len(bad)}/{len(rows)} coordinates within bound (worst margin {worst:.3g}), N={N}"


def suite_independence(level: str, fault: str | None = None):
    from .game import random_game, simulate
    from .oracles import joint_vs_product_l1

    T = 20_000 if level == "fast" else 100_000
    game = random_game(2, [2, 2], [2, 2], seed=5)
    pols = [np.full((2, 2), 0.5), np.array([[0.9, 0.1], [0.2, 0.8]])]
    states, _, _ = simulate(game, pols, T, game.streams(0))
    if fault == "independence":
        states = states.copy()
        states[1] = states[0]
    l1 = joint_vs_product_l1(states[:, :T], [2, 2])
    # changing player 1's policy must leave player 0's path untouched
    alt = [pols[0], np.full((2, 2), 0.5)]
    states2, _, _ = simulate(game, alt, 2000, game.streams(0))
    same = np.array_equal(states[0, :2000], states2[0, :2000])
    return l1 <= 0.05 and same, f"joint vs product L1 {l1:.4f} over {T} steps, path isolation {same}"


def suite_resume(level: str, fault: str | None = None):
    from .config import ExperimentConfig, LoggingConfig
    from .experiment import run_experiment

    with tempfile.TemporaryDirectory() as tmp:
        base = dict(game={"preset": "random", "n": 2, "state_sizes": 2, "action_sizes": 2, "seed": 3},
                    d=5, delta=0.02, cap=10**6, seed=4,
                    logging=LoggingConfig(thin=1, gap_every=10, checkpoint_every=20))
        full = ExperimentConfig(episodes=50, out=str(Path(tmp) / "a"), **base)
        run_experiment(full)
        part = ExperimentConfig(episodes=30, out=str(Path(tmp) / "b"), **base)
        run_experiment(part)
        part.episodes = 50
        run_experiment(part, resume=Path(tmp) / "b" / "checkpoints" / "ckpt_0000020.json")
        a = (Path(tmp) / "a" / "trajectory.csv").read_bytes()
        b = (Path(tmp) / "b" / "trajectory.csv").read_bytes()
    return a == b, "checkpoint resume reproduces the uninterrupted CSV" if a == b else "resumed CSV differs"


SUITES = {
    "roundtrip": suite_roundtrip,
    "projection": suite_projection,
    "lp": suite_lp,
    "bias": suite_bias,
    "independence": suite_independence,
    "resume": suite_resume,
}


def run_suites(level: str = "fast", fault: str | None = None, out=print) -> bool:
    all_ok = True
    for name, fn in SUITES.items():
        t0 = time.perf_counter()
        try:
            ok, msg = fn(level, fault)
        except Exception as exc:  # report and keep going
            ok, msg = False, f"error: {type(exc).__name__}: {exc}"
        all_ok &= bool(ok)
        out(f"[{'PASS' if ok else 'FAIL'}] {name:<12} {msg} ({time.perf_counter() - t0:.1f}s)")
    return all_ok
