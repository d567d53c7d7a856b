import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def swap_chain():
    """Two states, two actions, every action swaps the state."""
    from stochgame_da.game import PlayerChain
    P = np.zeros((2, 2, 2))
    P[0, :, 1] = 1.0
    P[1, :, 0] = 1.0
    return PlayerChain(P)


def simplex_chain(n_actions):
    from stochgame_da.game import PlayerChain
    return PlayerChain(np.ones((1, n_actions, 1)))
