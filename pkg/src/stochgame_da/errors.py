"""Exception types shared across the package."""


class GameInputError(ValueError):
    """Out-of-range index, malformed distribution, or bad game parameter."""


class NonErgodic(RuntimeError):
    """An induced chain has more than one recurrent class (or none mixes)."""


class EmptyShrunkPolytope(ValueError):
    def __init__(self, delta, player=None, margin=None):
        who = "player ?" if player is None else f"player {player}"
        msg = f"shrunk occupation polytope is empty for {who} at delta={delta!r}"
        if margin is not None:
            msg += f" (largest feasible uniform floor is {margin:.6g})"
        super().__init__(msg)
        self.delta = delta
        self.player = player
        self.margin = margin


class DeltaSearchFailed(ValueError):
    """No grid value of delta meets the vertex-distance certificate."""


class ProjectionError(RuntimeError):
    """Active-set or dual-ascent projection failed to converge."""

    def __init__(self, msg, residual=None):
        super().__init__(msg if residual is None else f"{msg} (residual {residual:.3e})")
        self.residual = residual


class LPError(RuntimeError):
    pass


class InfeasibleLP(LPError):
    pass


class EnumerationTooLarge(ValueError):
    def __init__(self, size, cap):
        super().__init__(
            f"joint state-action enumeration has {size} entries, above the cap of {cap}"
        )
        self.size = size
        self.cap = cap


class BatchCapExceeded(RuntimeError):
    """A batch ran past its length cap before every player covered its states.

    ``partial`` holds whatever statistics were gathered (per-player R so far,
    covered-state masks, steps simulated).
    """

    def __init__(self, cap, partial):
        super().__init__(f"batch exceeded the length cap of {cap} steps")
        self.cap = cap
        self.partial = partial


class ConfigError(ValueError):
    pass
