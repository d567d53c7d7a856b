"""Episodic learning of stationary equilibrium policies.

Each episode every player follows the policy induced by its current occupation
measure.  After a burn-in of ``d`` steps a player records, for the first visit
to each of its states, the importance-weighted reward ``r / pi(a|s)``; the
episode ends once every player has covered its state space.  The resulting
gradient estimates drive either a dual-averaging update (quadratic
regulariser, Euclidean projection onto the shrunk polytope) or a two-step KL
mirror-descent update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import BatchCapExceeded, GameInputError
from .game import GameConfig, Streams
from .metrics import GapAccumulator, best_response_value
from .occupancy import (
    OccupationPolytope,
    build_polytope,
    mixing_time_bound,
    policy_from_occupation,
    shrink,
)
from .projection import Regularizer, da_argmax, euclidean_project, kl_project, kl_simplex_step

POLICY_FLOOR = 1e-12


# ---------------------------------------------------------------- step sizes


@dataclass(frozen=True)
class Schedule:
    """Step sizes: ``inverse_power`` l^-beta, ``half_power`` l^-(1/2+beta), ``scaled_inverse`` c/l."""

    kind: str = "inverse_power"
    beta: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if self.kind == "inverse_power" and not 0.5 < self.beta <= 1.0:
            raise ValueError("inverse_power needs beta in (1/2, 1]")
        if self.kind == "half_power" and not self.beta > 0:
            raise ValueError("half_power needs beta > 0")
        if self.kind == "scaled_inverse" and not self.c > 0:
            raise ValueError("scaled_inverse needs c > 0")
        if self.kind not in ("inverse_power", "half_power", "scaled_inverse"):
            raise ValueError(f"unknown schedule {self.kind!r}")

    def to_dict(self):
        return {"kind": self.kind, "beta": self.beta, "c": self.c}


def step_size(schedule: Schedule, ell: int) -> float:
    if ell < 1:
        raise ValueError("episode index starts at 1")
    if schedule.kind == "inverse_power":
        return float(ell ** -schedule.beta)
    if schedule.kind == "half_power":
        return float(ell ** -(0.5 + schedule.beta))
    return schedule.c / ell


def cumulative_weight(schedule: Schedule, k: int) -> float:
    """``w^k = sum_{l<=k} eta_l``."""
    return float(sum(step_size(schedule, l) for l in range(1, k + 1)))


def auto_burn_in(tau: float, epsilon: float, sizes) -> int:
    """``ceil(tau * ln((6n/eps) * sum_i |A_i||S_i|))``."""
    n = len(sizes)
    return int(math.ceil(tau * math.log(6 * n / epsilon * sum(sizes))))


# ---------------------------------------------------------------- batches


@dataclass
class BatchResult:
    R: list                  # per-player estimate over (s, a)
    length: int              # steps in the batch (times tau^k .. tau^{k+1} - 1)
    cover_times: list        # per player, step index at which its states were all seen
    next_state: np.ndarray   # joint state after the batch
    reward_sum: np.ndarray   # per player, over the whole batch
    reward_sum_post: np.ndarray  # per player, burn-in excluded
    uncovered: np.ndarray    # per player, fraction of states never sampled (fixed-length mode)


def _cum_policy(policy):
    cum = np.cumsum(policy, axis=1)
    cum[:, -1] = 1.0
    return np.ascontiguousarray(cum)


def run_batch(game: GameConfig, policies, d: int, streams: Streams, joint_state,
              cap: int | None = None, fixed_len: int | None = None,
              reward_shift: float = 0.0) -> BatchResult:
    """Simulate one episode from ``joint_state`` and build the gradient estimates.

    ``cap`` bounds the number of post-burn-in steps; ``fixed_len`` replaces the
    cover-time stopping rule by a fixed episode length.  ``reward_shift`` is
    added to every reward before importance weighting (the KL pathway uses -1).
    """
    if d < 1:
        raise GameInputError("burn-in d must be at least 1")
    n = game.n
    chunk = d + 8 * max(c.n_states for c in game.chains) + 32
    state_parts, action_parts, covers, ends = [], [], [], []
    cum_pis = []
    for i, chain in enumerate(game.chains):
        pol = np.asarray(policies[i])
        if np.any(pol <= 0):
            raise GameInputError(f"player {i}: policy must be strictly positive")
        cum_pis.append(_cum_policy(pol))
        st, ac = [], []
        s, total, cover = int(joint_state[i]), 0, -1
        target = fixed_len if fixed_len is not None else None
        while True:
            if target is not None:
                if total >= target:
                    break
            elif cover >= 0:
                break
            seg_s, seg_a = _kernels.walk(cum_pis[i], chain._cum, s, streams[i].random((chunk, 2)))
            st.append(seg_s[:-1])
            ac.append(seg_a)
            s = int(seg_s[-1])
            total += chunk
            if target is None:
                cover = int(_kernels.cover_index(np.concatenate(st), d, chain.n_states))
                if cover < 0 and cap is not None and total - d > cap:
                    partial = {"steps": total, "player": i,
                               "covered": np.unique(np.concatenate(st)[d:]).tolist()}
                    raise BatchCapExceeded(cap, partial)
        if target is None and cap is not None and cover - d > cap:
            raise BatchCapExceeded(cap, {"steps": cover + 1, "player": i,
                                         "covered": list(range(chain.n_states))})
        state_parts.append([np.concatenate(st)])
        action_parts.append([np.concatenate(ac)])
        covers.append(cover)
        ends.append(s)
    L = fixed_len if fixed_len is not None else max(covers) + 1
    for i, chain in enumerate(game.chains):
        have = len(state_parts[i][0])
        s = ends[i]
        while have < L + 1:
            seg_s, seg_a = _kernels.walk(cum_pis[i], chain._cum, s, streams[i].random((chunk, 2)))
            state_parts[i].append(seg_s[:-1])
            action_parts[i].append(seg_a)
            s = int(seg_s[-1])
            have += chunk
    states = np.stack([np.concatenate(p)[: L + 1] for p in state_parts])
    actions = np.stack([np.concatenate(p)[:L] for p in action_parts])
    rewards = game.reward.evaluate(states[:, :L], actions)

    R, uncovered = [], np.zeros(n)
    for i, chain in enumerate(game.chains):
        A = chain.n_actions
        stop = covers[i] + 1 if fixed_len is None else L
        window = states[i, d:stop]
        seen, first = np.unique(window, return_index=True)
        t = d + first
        a = actions[i, t]
        pol = np.asarray(policies[i])
        est = np.zeros(chain.dim)
        est[seen * A + a] = (rewards[i, t] + reward_shift) / pol[seen, a]
        R.append(est)
        uncovered[i] = 1.0 - len(seen) / chain.n_states
    return BatchResult(R, int(L), covers, states[:, L].copy(), rewards.sum(axis=1),
                       rewards[:, d:].sum(axis=1), uncovered)


# ---------------------------------------------------------------- updates


@dataclass
class PlayerState:
    """One player's learner variables: dual score, occupation, policy, warm-start data."""

    Y: np.ndarray
    rho: np.ndarray
    policy: np.ndarray
    working: list = field(default_factory=list)
    dual: np.ndarray | None = None
    k: int = 0
    floored: int = 0


def _policy(rho, polytope, floor=0.0):
    pi = policy_from_occupation(rho, polytope.n_states, polytope.n_actions)
    hit = 0
    if floor > 0 and pi.min() < floor:
        hit = int((pi < floor).sum())
        pi = np.maximum(pi, floor)
        pi /= pi.sum(axis=1, keepdims=True)
    return pi, hit


def da_update(state: PlayerState, R, eta: float, polytope: OccupationPolytope,
              reg: Regularizer) -> PlayerState:
    """``Y += eta R``; ``rho = argmax <rho, Y> - h(rho)`` over the shrunk polytope."""
    Y = state.Y + eta * np.asarray(R, dtype=float)
    rho, info = da_argmax(polytope, Y, reg, start=state.rho, working=state.working,
                          return_info=True)
    pi, _ = _policy(rho, polytope)
    return PlayerState(Y, rho, pi, info.working, state.dual, state.k + 1, state.floored)


def md_update(state: PlayerState, R, eta: float, polytope: OccupationPolytope) -> PlayerState:
    """Multiplicative step on the simplex, then KL projection onto the (unshrunk) polytope."""
    g = eta * np.asarray(R, dtype=float)
    half = kl_simplex_step(state.rho, g)
    rho, dual = kl_project(polytope, half, dual=state.dual, return_dual=True)
    pi, hit = _policy(rho, polytope, POLICY_FLOOR)
    return PlayerState(state.Y + g, rho, pi, [], dual, state.k + 1, state.floored + hit)


# ---------------------------------------------------------------- runs


@dataclass
class EpisodeRecord:
    k: int
    start: int
    end: int
    eta: float
    mean_reward: np.ndarray        # whole batch, burn-in included
    mean_reward_post: np.ndarray   # burn-in excluded
    R: list | None = None
    rho: list | None = None
    uncovered: np.ndarray | None = None


@dataclass
class TrajectoryLog:
    records: list = field(default_factory=list)
    iterates: list = field(default_factory=list)  # (k, eta, [rho_i])
    gaps: list = field(default_factory=list)      # (k, averaged gap, gap of rho_bar)
    rho_bar: list | None = None
    w: float = 0.0
    floored: int = 0

    def mean_rewards(self) -> np.ndarray:
        return np.array([r.mean_reward for r in self.records])


class Learner:
    """Stateful driver for the episodic algorithm; ``run`` wraps it for one-shot use."""

    def __init__(self, game: GameConfig, algo: str = "DA", schedule: Schedule | None = None,
                 d: int = 10, deltas=None, reg: Regularizer | None = None, seed: int | None = None,
                 cap: int | None = None, tau: float | None = None, fixed_len: int | None = None,
                 thin: int = 0, gap_every: int = 0, keep_R: bool = False):
        algo = algo.upper()
        if algo not in ("DA", "MD"):
            raise ValueError("algo must be DA or MD")
        self.game = game
        self.algo = algo
        self.schedule = schedule or Schedule()
        self.d = int(d)
        self.reg = reg or Regularizer("quadratic", 0.5)
        if deltas is None:
            deltas = [1.0 / (20 * c.dim) for c in game.chains]
        self.deltas = [float(x) for x in np.broadcast_to(deltas, (game.n,))]
        base = [build_polytope(c) for c in game.chains]
        self.polytopes = [shrink(p, dl, i) for i, (p, dl) in enumerate(zip(base, self.deltas))]
        self.kl_polytopes = base
        if tau is None:
            tau = max(mixing_time_bound(c, delta=dl)[0] for c, dl in zip(game.chains, self.deltas))
        self.tau = float(tau)
        if cap is None and fixed_len is None:
            cap = int(math.ceil(50 * self.tau * max(c.n_states for c in game.chains)))
        self.cap = cap
        self.fixed_len = fixed_len
        self.thin = int(thin)
        self.gap_every = int(gap_every)
        self.keep_R = keep_R
        self.streams = game.streams(seed)
        self.joint_state = self.streams.nature.integers(
            0, [c.n_states for c in game.chains]).astype(np.int64)
        self.t = 0
        self.k = 0
        self.w = 0.0
        self.players = []
        for poly in self.polytopes:
            rho0 = euclidean_project(poly, np.full(poly.dim, 1.0 / poly.dim))
            pi0, _ = _policy(rho0, poly)
            self.players.append(PlayerState(np.zeros(poly.dim), rho0, pi0))
        self.rho_bar = [np.zeros(p.dim) for p in self.polytopes]
        self.gap_acc = GapAccumulator(game) if self.gap_every > 0 else None
        self.log = TrajectoryLog()

    # one episode ----------------------------------------------------------
    def episode(self) -> EpisodeRecord:
        ell = self.k + 1
        eta = step_size(self.schedule, ell)
        rhos = [p.rho for p in self.players]
        shift = -1.0 if self.algo == "MD" else 0.0
        batch = run_batch(self.game, [p.policy for p in self.players], self.d, self.streams,
                          self.joint_state, self.cap, self.fixed_len, shift)
        # weighted running average of the played iterates
        self.w += eta
        for i, r in enumerate(rhos):
            self.rho_bar[i] += (eta / self.w) * (r - self.rho_bar[i])
        if self.gap_acc is not None:
            self.gap_acc.add(rhos, eta)
        record = EpisodeRecord(
            ell, self.t, self.t + batch.length, eta,
            batch.reward_sum / batch.length,
            batch.reward_sum_post / max(batch.length - self.d, 1),
            R=[r.copy() for r in batch.R] if self.keep_R else None,
            uncovered=batch.uncovered if self.fixed_len is not None else None,
        )
        if self.thin and ell % self.thin == 0:
            record.rho = [r.copy() for r in rhos]
            self.log.iterates.append((ell, eta, record.rho))
        new = []
        for i, st in enumerate(self.players):
            if self.algo == "DA":
                new.append(da_update(st, batch.R[i], eta, self.polytopes[i], self.reg))
            else:
                new.append(md_update(st, batch.R[i], eta, self.kl_polytopes[i]))
        self.players = new
        self.joint_state = batch.next_state
        self.t += batch.length
        self.k = ell
        if self.gap_acc is not None and ell % self.gap_every == 0:
            self.log.gaps.append((ell, self.gap_acc.gap(self.polytopes), self.gap_of_average()))
        self.log.records.append(record)
        return record

    def gap_of_average(self) -> float:
        from .metrics import ni_gap
        return ni_gap(self.game, self.rho_bar, self.polytopes, self.gap_acc.table)

    def run(self, episodes: int, callback=None) -> TrajectoryLog:
        for _ in range(episodes):
            rec = self.episode()
            if callback is not None:
                callback(self, rec)
        self.log.rho_bar = [r.copy() for r in self.rho_bar]
        self.log.w = self.w
        self.log.floored = sum(p.floored for p in self.players)
        return self.log

    # checkpoints ----------------------------------------------------------
    def state_dict(self) -> dict:
        doc = {
            "episode": self.k,
            "t": self.t,
            "w": self.w,
            "joint_state": [int(s) for s in self.joint_state],
            "rng": self.streams.get_state(),
            "players": [
                {"Y": p.Y.tolist(), "rho": p.rho.tolist(), "working": [int(j) for j in p.working],
                 "dual": None if p.dual is None else p.dual.tolist(), "floored": p.floored}
                for p in self.players
            ],
            "rho_bar": [r.tolist() for r in self.rho_bar],
        }
        if self.gap_acc is not None:
            doc["gap_acc"] = {"grad": [g.tolist() for g in self.gap_acc.grad],
                              "pay": self.gap_acc.pay.tolist(), "weight": self.gap_acc.weight}
        return doc

    def load_state_dict(self, doc: dict):
        self.k = int(doc["episode"])
        self.t = int(doc["t"])
        self.w = float(doc["w"])
        self.joint_state = np.array(doc["joint_state"], dtype=np.int64)
        self.streams.set_state(doc["rng"])
        self.players = []
        for p, poly in zip(doc["players"], self.polytopes):
            rho = np.array(p["rho"])
            floor = POLICY_FLOOR if self.algo == "MD" else 0.0
            pi, _ = _policy(rho, poly, floor)
            dual = None if p["dual"] is None else np.array(p["dual"])
            self.players.append(PlayerState(np.array(p["Y"]), rho, pi, list(p["working"]),
                                            dual, self.k, int(p["floored"])))
        self.rho_bar = [np.array(r) for r in doc["rho_bar"]]
        if self.gap_acc is not None and "gap_acc" in doc:
            g = doc["gap_acc"]
            self.gap_acc.grad = [np.array(x) for x in g["grad"]]
            self.gap_acc.pay = np.array(g["pay"])
            self.gap_acc.weight = float(g["weight"])


def run(game: GameConfig, algo: str = "DA", schedule: Schedule | None = None, d: int = 10,
        deltas=None, episodes: int = 100, seed: int | None = None, reg: Regularizer | None = None,
        **options) -> TrajectoryLog:
    """Run ``episodes`` episodes from the projected uniform start and return the log."""
    learner = Learner(game, algo, schedule, d, deltas, reg, seed, **options)
    return learner.run(episodes)
