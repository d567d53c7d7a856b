"""Compiled inner loops for chain simulation."""

import numpy as np
from numba import njit


@njit(cache=True)
def walk(cum_pi, cum_P, s0, u):
    """Simulate one player's chain for ``u.shape[0]`` steps.

    ``cum_pi[s]`` is the cumulative action distribution in state s,
    ``cum_P[s, a]`` the cumulative next-state distribution; ``u[t, 0]`` picks
    the action and ``u[t, 1]`` the next state at step t.
    Returns ``states`` (length T+1, the last entry is the post-walk state) and
    ``actions`` (length T).
    """
    T = u.shape[0]
    n_actions = cum_pi.shape[1]
    n_states = cum_P.shape[2]
    states = np.empty(T + 1, dtype=np.int64)
    actions = np.empty(T, dtype=np.int64)
    s = s0
    for t in range(T):
        states[t] = s
        a = 0
        x = u[t, 0]
        while a < n_actions - 1 and cum_pi[s, a] <= x:
            a += 1
        actions[t] = a
        y = u[t, 1]
        nxt = 0
        while nxt < n_states - 1 and cum_P[s, a, nxt] <= y:
            nxt += 1
        s = nxt
    states[T] = s
    return states, actions


@njit(cache=True)
def cover_index(states, start, n_states):
    """First index t >= start by which every state has appeared in states[start:t+1]; -1 if none."""
    seen = np.zeros(n_states, dtype=np.bool_)
    count = 0
    for t in range(start, states.shape[0]):
        s = states[t]
        if not seen[s]:
            seen[s] = True
            count += 1
            if count == n_states:
                return t
    return -1
