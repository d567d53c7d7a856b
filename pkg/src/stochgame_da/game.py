"""Stochastic games with independent per-player chains.

A game is a tuple of :class:`PlayerChain` (each player's own states, actions and
transition kernel) plus a reward oracle coupling all players.  Randomness is
split into one stream per player and one for nature, so each player's chain
only ever consumes its own stream.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import EnumerationTooLarge, GameInputError

ROW_TOL = 1e-12
POLICY_TOL = 1e-9
DEFAULT_ENUM_CAP = 10**7


@dataclass(frozen=True, eq=False)
class PlayerChain:
    """Transition tensor ``P[s, a, s']`` for one player."""

    transition: np.ndarray

    def __post_init__(self):
        P = np.array(self.transition, dtype=float)
        if P.ndim != 3 or P.shape[0] != P.shape[2] or min(P.shape) < 1:
            raise GameInputError(f"transition must have shape (S, A, S), got {P.shape}")
        if np.any(P < 0):
            raise GameInputError("transition has negative entries")
        if np.max(np.abs(P.sum(axis=2) - 1.0)) > ROW_TOL:
            raise GameInputError("transition rows must sum to 1")
        P.setflags(write=False)
        object.__setattr__(self, "transition", P)
        cum = np.cumsum(P, axis=2)
        cum[..., -1] = 1.0
        cum.setflags(write=False)
        object.__setattr__(self, "_cum", cum)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def dim(self) -> int:
        return self.n_states * self.n_actions

    def induced_kernel(self, policy: np.ndarray) -> np.ndarray:
        """``P^pi(s'|s) = sum_a P(s'|s,a) pi(a|s)``."""
        return np.einsum("sat,sa->st", self.transition, policy)


class TabularReward:
    """Rewards stored as a tensor of shape ``(n, D_1, ..., D_n)``.

    Player j's axis is indexed by ``s_j * |A_j| + a_j``.
    """

    is_tabular = True

    def __init__(self, table, dims: Sequence[tuple[int, int]]):
        table = np.array(table, dtype=float)
        self.dims = [tuple(int(x) for x in d) for d in dims]
        expect = (len(self.dims),) + tuple(s * a for s, a in self.dims)
        if table.shape != expect:
            raise GameInputError(f"reward table shape {table.shape} != {expect}")
        if table.min() < 0 or table.max() > 1:
            raise GameInputError("tabular rewards must lie in [0, 1]")
        table.setflags(write=False)
        self.table = table

    def evaluate(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Rewards for every player along joint trajectories of shape (n, T)."""
        idx = tuple(
            states[j] * self.dims[j][1] + actions[j] for j in range(len(self.dims))
        )
        return np.stack([self.table[i][idx] for i in range(len(self.dims))])

    def to_table(self, cap=DEFAULT_ENUM_CAP) -> np.ndarray:
        return self.table

    def to_dict(self) -> dict:
        return {"kind": "tabular", "table": self.table.ravel().tolist()}


class SmartGridReward:
    """``(u(a_i) - price * (a_i - s_i)^+)^+ / C^p`` with ``price = lam * sum_j (a_j - s_j)^+``.

    ``u(a) = a**p``; raw rewards below zero are clamped to 0 before normalising.
    """

    is_tabular = False

    def __init__(self, C: int, lam: float, n: int, exponent: float = 2.0):
        self.C = int(C)
        self.lam = float(lam)
        self.n = int(n)
        self.exponent = float(exponent)
        self.dims = [(self.C + 1, self.C + 1)] * self.n

    def evaluate(self, states, actions):
        states = np.asarray(states, dtype=float)
        actions = np.asarray(actions, dtype=float)
        demand = np.maximum(actions - states, 0.0)
        price = self.lam * demand.sum(axis=0, keepdims=True)
        raw = actions**self.exponent - price * demand
        return np.maximum(raw, 0.0) / float(self.C) ** self.exponent

    def to_table(self, cap=DEFAULT_ENUM_CAP) -> np.ndarray:
        return _materialize(self, cap)

    def to_dict(self) -> dict:
        return {"kind": "smart_grid", "C": self.C, "lambda": self.lam,
                "n": self.n, "exponent": self.exponent}


def _materialize(reward, cap):
    dims = reward.dims
    sizes = [s * a for s, a in dims]
    total = len(dims) * int(np.prod(sizes))
    if total > cap:
        raise EnumerationTooLarge(total, cap)
    grids = np.meshgrid(*[np.arange(D) for D in sizes], indexing="ij")
    states = np.stack([g.ravel() // a for g, (_, a) in zip(grids, dims)])
    actions = np.stack([g.ravel() % a for g, (_, a) in zip(grids, dims)])
    return reward.evaluate(states, actions).reshape((len(dims),) + tuple(sizes))


@dataclass(frozen=True, eq=False)
class GameConfig:
    chains: tuple
    reward: object
    seed: int = 0
    enum_cap: int = DEFAULT_ENUM_CAP
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "chains", tuple(self.chains))
        if len(self.chains) < 1:
            raise GameInputError("a game needs at least one player")
        if [(c.n_states, c.n_actions) for c in self.chains] != [tuple(d) for d in self.reward.dims]:
            raise GameInputError("reward dimensions do not match the player chains")

    @property
    def n(self) -> int:
        return len(self.chains)

    @property
    def dims(self) -> list[int]:
        return [c.dim for c in self.chains]

    @property
    def joint_size(self) -> int:
        return self.n * int(np.prod(self.dims))

    def reward_table(self) -> np.ndarray:
        """Full reward tensor, materialised if procedural and under the enumeration cap."""
        if self.joint_size > self.enum_cap:
            raise EnumerationTooLarge(self.joint_size, self.enum_cap)
        return self.reward.to_table(self.enum_cap)

    def streams(self, seed: int | None = None) -> "Streams":
        return Streams.from_seed(self.seed if seed is None else seed, self.n)

    def to_dict(self) -> dict:
        doc = {
            "players": [
                {"n_states": c.n_states, "n_actions": c.n_actions,
                 "transition": c.transition.ravel().tolist()}
                for c in self.chains
            ],
            "reward": self.reward.to_dict(),
            "seed": int(self.seed),
            "enum_cap": int(self.enum_cap),
            "meta": self.meta,
        }
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def digest(self) -> str:
        """Content hash, independent of seed and metadata."""
        doc = self.to_dict()
        body = json.dumps({"players": doc["players"], "reward": doc["reward"]}, sort_keys=True)
        return hashlib.sha256(body.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, doc: dict) -> "GameConfig":
        chains = []
        for p in doc["players"]:
            S, A = int(p["n_states"]), int(p["n_actions"])
            chains.append(PlayerChain(np.asarray(p["transition"], dtype=float).reshape(S, A, S)))
        rdoc = doc["reward"]
        dims = [(c.n_states, c.n_actions) for c in chains]
        if rdoc["kind"] == "tabular":
            shape = (len(dims),) + tuple(s * a for s, a in dims)
            reward = TabularReward(np.asarray(rdoc["table"], dtype=float).reshape(shape), dims)
        elif rdoc["kind"] == "smart_grid":
            reward = SmartGridReward(rdoc["C"], rdoc["lambda"], rdoc["n"], rdoc.get("exponent", 2.0))
        else:
            raise GameInputError(f"unknown reward kind {rdoc['kind']!r}")
        return cls(tuple(chains), reward, int(doc.get("seed", 0)),
                   int(doc.get("enum_cap", DEFAULT_ENUM_CAP)), dict(doc.get("meta", {})))

    @classmethod
    def from_json(cls, text: str) -> "GameConfig":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------- randomness


class Streams:
    """One counter-based generator per player plus one for nature."""

    def __init__(self, players: list, nature):
        self.players = players
        self.nature = nature

    @classmethod
    def from_seed(cls, seed: int, n: int) -> "Streams":
        children = np.random.SeedSequence(int(seed)).spawn(n + 1)
        gens = [np.random.Generator(np.random.Philox(c)) for c in children]
        return cls(gens[:n], gens[n])

    def __getitem__(self, i):
        return self.players[i]

    def __len__(self):
        return len(self.players)

    def get_state(self) -> dict:
        return {"players": [_jsonable(g.bit_generator.state) for g in self.players],
                "nature": _jsonable(self.nature.bit_generator.state)}

    def set_state(self, state: dict):
        for g, st in zip(self.players, state["players"]):
            g.bit_generator.state = _from_jsonable(st)
        self.nature.bit_generator.state = _from_jsonable(state["nature"])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return {"__u64__": [int(x) for x in obj.ravel()], "shape": list(obj.shape)}
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _from_jsonable(obj):
    if isinstance(obj, dict):
        if "__u64__" in obj:
            return np.array(obj["__u64__"], dtype=np.uint64).reshape(obj["shape"])
        return {k: _from_jsonable(v) for k, v in obj.items()}
    return obj


# ---------------------------------------------------------------- simulation


def _check_policy(policy: np.ndarray, chain: PlayerChain | None = None) -> np.ndarray:
    policy = np.asarray(policy, dtype=float)
    if policy.ndim != 2:
        raise GameInputError("policy must be a (S, A) array")
    if chain is not None and policy.shape != (chain.n_states, chain.n_actions):
        raise GameInputError(f"policy shape {policy.shape} does not match chain")
    if np.any(policy < 0) or np.max(np.abs(policy.sum(axis=1) - 1.0)) > POLICY_TOL:
        raise GameInputError("policy rows must be nonnegative and sum to 1")
    return policy


def sample_action(policy, state: int, rng) -> int:
    """Draw an action from ``policy[state]`` using one uniform from ``rng``."""
    policy = _check_policy(policy)
    if not 0 <= state < policy.shape[0]:
        raise GameInputError(f"state {state} out of range")
    cum = np.cumsum(policy[state])
    return int(min(np.searchsorted(cum, rng.random(), side="right"), len(cum) - 1))


def step(game: GameConfig, joint_state, joint_action, rng: Streams) -> np.ndarray:
    """Advance every player's chain by one step; player i uses only ``rng[i]``."""
    joint_state = np.asarray(joint_state, dtype=int)
    joint_action = np.asarray(joint_action, dtype=int)
    if joint_state.shape != (game.n,) or joint_action.shape != (game.n,):
        raise GameInputError("joint state/action must have one entry per player")
    nxt = np.empty(game.n, dtype=int)
    for i, c in enumerate(game.chains):
        s, a = int(joint_state[i]), int(joint_action[i])
        if not (0 <= s < c.n_states and 0 <= a < c.n_actions):
            raise GameInputError(f"player {i}: index (s={s}, a={a}) out of range")
        cum = c._cum[s, a]
        nxt[i] = min(np.searchsorted(cum, rng[i].random(), side="right"), c.n_states - 1)
    return nxt


def walk_player(chain: PlayerChain, policy: np.ndarray, s0: int, T: int, rng):
    """Simulate T steps of one player's chain; returns (states[T+1], actions[T])."""
    cum_pi = np.cumsum(policy, axis=1)
    cum_pi[:, -1] = 1.0
    u = rng.random((T, 2))
    return _kernels.walk(np.ascontiguousarray(cum_pi), chain._cum, int(s0), u)


def simulate(game: GameConfig, policies, T: int, rng: Streams, joint_state=None):
    """Joint trajectory of length T under fixed stationary policies.

    Returns ``(states (n, T+1), actions (n, T), rewards (n, T))``.
    """
    if joint_state is None:
        joint_state = np.zeros(game.n, dtype=int)
    states, actions = [], []
    for i, c in enumerate(game.chains):
        pol = _check_policy(policies[i], c)
        s, a = walk_player(c, pol, joint_state[i], T, rng[i])
        states.append(s)
        actions.append(a)
    states = np.stack(states)
    actions = np.stack(actions)
    return states, actions, game.reward.evaluate(states[:, :T], actions)


# ---------------------------------------------------------------- generators


def smart_grid_transition(C: int, G: int, s: int, a: int) -> np.ndarray:
    """Next-storage distribution ``min(C, g + (s - a)^+)`` with ``g ~ Unif{0..G-1}``."""
    if not (0 <= s <= C and 0 <= a <= C):
        raise GameInputError("storage/consumption out of range")
    row = np.zeros(C + 1)
    left = max(s - a, 0)
    for g in range(G):
        row[min(C, g + left)] += 1.0 / G
    return row


def smart_grid_reward(C: int, lam: float, s, a, i: int, exponent: float = 2.0) -> float:
    s = np.asarray(s, dtype=float)
    a = np.asarray(a, dtype=float)
    if s.shape != a.shape or not 0 <= i < len(s):
        raise GameInputError("bad joint state/action or player index")
    if np.any((s < 0) | (s > C) | (a < 0) | (a > C)):
        raise GameInputError("storage/consumption out of range")
    r = SmartGridReward(C, lam, len(s), exponent).evaluate(s[:, None], a[:, None])
    return float(r[i, 0])


def smart_grid_game(n: int, C: int = 7, G=4, lam: float = 0.0, exponent: float = 2.0,
                    seed: int = 0) -> GameConfig:
    G = np.broadcast_to(np.asarray(G, dtype=int), (n,))
    if n < 1 or C < 1 or np.any(G < 1) or lam < 0:
        raise GameInputError("smart grid needs n >= 1, C >= 1, G_i >= 1, lambda >= 0")
    chains = []
    for Gi in G:
        P = np.array([[smart_grid_transition(C, int(Gi), s, a) for a in range(C + 1)]
                      for s in range(C + 1)])
        chains.append(PlayerChain(P))
    meta = {"kind": "smart_grid", "n": int(n), "C": int(C), "G": [int(g) for g in G],
            "lambda": float(lam), "exponent": float(exponent)}
    return GameConfig(tuple(chains), SmartGridReward(C, lam, n, exponent), seed, meta=meta)


def _floored_simplex(rng, size, k, floor):
    """Rows from Dirichlet(1) mixed so every entry is at least ``floor``."""
    x = rng.dirichlet(np.ones(k), size=size)
    return floor + (1.0 - k * floor) * x


def random_game(n: int, state_sizes, action_sizes, seed: int = 0, floor: float = 0.01) -> GameConfig:
    """Random ergodic game: every transition entry is at least ``floor``."""
    state_sizes = list(np.broadcast_to(state_sizes, (n,)))
    action_sizes = list(np.broadcast_to(action_sizes, (n,)))
    if min(state_sizes) < 1 or min(action_sizes) < 1:
        raise GameInputError("sizes must be >= 1")
    rng = np.random.default_rng(seed)
    chains = []
    for S, A in zip(state_sizes, action_sizes):
        fl = min(floor, 1.0 / S)
        P = _floored_simplex(rng, (S, A), S, fl)
        P /= P.sum(axis=2, keepdims=True)
        chains.append(PlayerChain(P))
    dims = list(zip(state_sizes, action_sizes))
    shape = (n,) + tuple(s * a for s, a in dims)
    table = rng.random(shape)
    meta = {"kind": "random", "n": n, "state_sizes": [int(s) for s in state_sizes],
            "action_sizes": [int(a) for a in action_sizes], "seed": int(seed)}
    return GameConfig(tuple(chains), TabularReward(table, dims), seed, meta=meta)


def zero_sum_two_player(state_sizes, action_sizes, seed: int = 0) -> GameConfig:
    """Constant-sum pair game: ``r_2 = 1 - r_1`` everywhere."""
    if len(np.atleast_1d(state_sizes)) not in (1, 2) or len(np.atleast_1d(action_sizes)) not in (1, 2):
        raise GameInputError("zero-sum generator is two-player only")
    g = random_game(2, state_sizes, action_sizes, seed)
    table = np.array(g.reward.table)
    table[1] = 1.0 - table[0]
    meta = dict(g.meta, kind="zero_sum")
    return GameConfig(g.chains, TabularReward(table, g.reward.dims), seed, meta=meta)


def game_from_spec(spec: dict) -> GameConfig:
    """Build a game from a preset description or an inline game document."""
    preset = spec.get("preset")
    if preset is None:
        return GameConfig.from_dict(spec)
    if preset == "smart_grid":
        return smart_grid_game(int(spec.get("n", 2)), int(spec.get("C", 7)), spec.get("G", 4),
                               float(spec.get("lambda", 0.0)), float(spec.get("exponent", 2.0)),
                               int(spec.get("seed", 0)))
    if preset == "random":
        return random_game(int(spec["n"]), spec["state_sizes"], spec["action_sizes"],
                           int(spec.get("seed", 0)))
    if preset == "zero_sum":
        return zero_sum_two_player(spec["state_sizes"], spec["action_sizes"], int(spec.get("seed", 0)))
    raise GameInputError(f"unknown game preset {preset!r}")
