"""Experiment configuration documents (JSON).

Schema (all keys optional except ``game``)::

    {
      "game": {"preset": "smart_grid", "n": 2, "C": 7, "G": 4, "lambda": 0.0}
              | {"preset": "random", "n": 2, "state_sizes": 2, "action_sizes": 2, "seed": 0}
              | {"preset": "zero_sum", "state_sizes": 2, "action_sizes": 2, "seed": 0}
              | {"file": "game.json"}            # relative to the config file
              | <inline game document>,
      "algo": "DA" | "MD",
      "regularizer": {"kind": "quadratic", "coef": 0.5},
      "schedule": {"kind": "inverse_power" | "half_power" | "scaled_inverse", "beta": 1.0, "c": 1.0},
      "d": 10 | "auto",
      "delta": 0.01 | [0.01, 0.02] | "auto" | "fraction",
      "epsilon": 0.1,
      "episodes": 1000,
      "seed": 0,
      "tau": null,
      "fixed_batch_len": null,
      "cap": null,
      "logging": {"thin": 0, "gap_every": 0, "checkpoint_every": 1000},
      "out": "runs/example"
    }

Environment overrides: ``STOCHGAME_SEED`` and ``STOCHGAME_OUT``.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError

ALGOS = ("DA", "MD")


@dataclass
class LoggingConfig:
    thin: int = 0
    gap_every: int = 0
    checkpoint_every: int = 1000


@dataclass
class ExperimentConfig:
    game: dict
    algo: str = "DA"
    regularizer: dict = field(default_factory=lambda: {"kind": "quadratic", "coef": 0.5})
    schedule: dict = field(default_factory=lambda: {"kind": "inverse_power", "beta": 1.0})
    d: object = 10
    delta: object = "fraction"
    epsilon: float = 0.1
    episodes: int = 1000
    seed: int = 0
    tau: float | None = None
    fixed_batch_len: int | None = None
    cap: int | None = None
    logging: LoggingConfig = field(default_factory=LoggingConfig)
    out: str = "runs/default"

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        import hashlib
        body = self.to_dict()
        body.pop("out")
        body.pop("episodes")
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]


def _check(cond, where, msg):
    if not cond:
        raise ConfigError(f"field {where!r}: {msg}")


def config_from_dict(doc: dict, base_dir: Path | None = None) -> ExperimentConfig:
    _check(isinstance(doc, dict), "<root>", "expected an object")
    known = set(ExperimentConfig.__dataclass_fields__)
    extra = set(doc) - known
    _check(not extra, sorted(extra)[0] if extra else "", "unknown field")
    _check("game" in doc, "game", "required")
    game = dict(doc["game"])
    if "file" in game:
        path = Path(game["file"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        _check(path.exists(), "game.file", f"{path} does not exist")
        game = {"file": str(path)}
    elif "preset" in game:
        _check(game["preset"] in ("smart_grid", "random", "zero_sum"), "game.preset",
               f"unknown preset {game['preset']!r}")
        if game["preset"] == "smart_grid":
            _check(int(game.get("C", 7)) >= 1, "game.C", "must be >= 1")
            _check(float(game.get("lambda", 0.0)) >= 0, "game.lambda", "must be >= 0")
            _check(1 <= int(game.get("n", 2)) <= 64, "game.n", "must be in 1..64")
    logging = LoggingConfig(**doc.get("logging", {}))
    cfg = ExperimentConfig(**{k: v for k, v in doc.items() if k != "logging"}, logging=logging)
    cfg.algo = str(cfg.algo).upper()
    _check(cfg.algo in ALGOS, "algo", "must be DA or MD")
    _check(isinstance(cfg.episodes, int) and cfg.episodes >= 0, "episodes", "must be a nonnegative integer")
    _check(cfg.d == "auto" or (isinstance(cfg.d, int) and cfg.d >= 1), "d", "must be 'auto' or an integer >= 1")
    _check(0 < float(cfg.epsilon) < 1, "epsilon", "must lie in (0, 1)")
    _check(isinstance(cfg.delta, (int, float, list)) or cfg.delta in ("auto", "fraction"),
           "delta", "must be a number, a list, 'auto' or 'fraction'")
    _check(cfg.regularizer.get("kind", "quadratic") in ("quadratic", "entropy"),
           "regularizer.kind", "must be quadratic or entropy")
    if "STOCHGAME_SEED" in os.environ:
        cfg.seed = int(os.environ["STOCHGAME_SEED"])
    if "STOCHGAME_OUT" in os.environ:
        cfg.out = os.environ["STOCHGAME_OUT"]
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return config_from_dict(doc, path.parent)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
