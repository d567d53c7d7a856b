"""Config-driven runs: trajectory CSV, iterates, checkpoints and summaries."""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .game import GameConfig, game_from_spec
from .learner import Learner, Schedule, auto_burn_in
from .occupancy import compute_delta, fraction_delta, mixing_time_bound
from .projection import Regularizer

CSV_COLUMNS = ["episode", "player", "mean_reward", "batch_len", "eta",
               "mean_reward_post_burnin", "running_mean_reward", "avg_gap", "gap_rho_bar"]

PRESETS = {
    "fig2": [("fig2_n2", 2, 0.0), ("fig2_n5", 5, 0.0)],
    "fig3a": [("fig3a_n2", 2, 1.5)],
    "fig3b": [("fig3b_n5", 5, 1.5)],
}
WINDOW = 500
SETTLE = 2000


def fmt(x) -> str:
    return format(float(x), ".17g")


def build_game(cfg: ExperimentConfig) -> GameConfig:
    spec = cfg.game
    if "file" in spec:
        return GameConfig.from_json(Path(spec["file"]).read_text())
    return game_from_spec(spec)


def resolve(cfg: ExperimentConfig, game: GameConfig, tau_override=None, fixed_len=None):
    """Concrete (deltas, tau, d) for a config."""
    if isinstance(cfg.delta, list):
        deltas = [float(x) for x in cfg.delta]
    elif cfg.delta == "fraction":
        deltas = [fraction_delta(c) for c in game.chains]
    elif cfg.delta == "auto":
        deltas = [compute_delta(c, cfg.epsilon, player=i) for i, c in enumerate(game.chains)]
    else:
        deltas = [float(cfg.delta)] * game.n
    tau = tau_override if tau_override is not None else cfg.tau
    if tau is None:
        cache = {}
        taus = []
        for c, dl in zip(game.chains, deltas):
            key = (c.transition.tobytes(), dl)
            if key not in cache:
                cache[key] = mixing_time_bound(c, delta=dl)[0]
            taus.append(cache[key])
        tau = max(taus)
    d = auto_burn_in(tau, cfg.epsilon, game.dims) if cfg.d == "auto" else int(cfg.d)
    return deltas, float(tau), d


def make_learner(cfg: ExperimentConfig, game: GameConfig, tau_override=None, fixed_len=None):
    deltas, tau, d = resolve(cfg, game, tau_override)
    reg = Regularizer(cfg.regularizer.get("kind", "quadratic"), float(cfg.regularizer.get("coef", 0.5)))
    sched = Schedule(**cfg.schedule)
    fixed = fixed_len if fixed_len is not None else cfg.fixed_batch_len
    gap_every = cfg.logging.gap_every if game.joint_size <= game.enum_cap else 0
    return Learner(game, cfg.algo, sched, d, deltas, reg, cfg.seed, cap=cfg.cap, tau=tau,
                   fixed_len=fixed, thin=cfg.logging.thin, gap_every=gap_every)


def run_experiment(cfg: ExperimentConfig, resume=None, tau_override=None, fixed_len=None,
                   quiet: bool = True) -> dict:
    """Run (or resume) an experiment and write its outputs under ``cfg.out``."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "checkpoints").mkdir(exist_ok=True)
    game = build_game(cfg)
    learner = make_learner(cfg, game, tau_override, fixed_len)
    header = {"game_hash": game.digest(), "config_hash": cfg.digest(), "deltas": learner.deltas,
              "d": learner.d, "tau": learner.tau, "cap": learner.cap}
    reward_sums = np.zeros(game.n)
    csv_path = out / "trajectory.csv"
    it_path = out / "iterates.jsonl"
    if resume is not None:
        ck = json.loads(Path(resume).read_text())
        if ck["game_hash"] != header["game_hash"] or ck["config_hash"] != header["config_hash"]:
            raise ValueError("checkpoint does not match this config/game (hash mismatch)")
        learner.load_state_dict(ck["learner"])
        reward_sums = np.array(ck["reward_sums"])
        _truncate_csv(csv_path, learner.k)
        _truncate_jsonl(it_path, learner.k)
    else:
        with open(csv_path, "w", newline="") as fh:
            csv.writer(fh).writerow(CSV_COLUMNS)
        if cfg.logging.thin:
            it_path.write_text(json.dumps(header) + "\n")
    (out / "game.json").write_text(game.to_json())
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=1))

    start = time.perf_counter()
    fh = open(csv_path, "a", newline="")
    writer = csv.writer(fh)
    itf = open(it_path, "a") if cfg.logging.thin else None
    remaining = cfg.episodes - learner.k
    try:
        for _ in range(max(remaining, 0)):
            n_gaps = len(learner.log.gaps)
            rec = learner.episode()
            reward_sums += rec.mean_reward
            gap = learner.log.gaps[-1] if len(learner.log.gaps) > n_gaps else None
            for i in range(game.n):
                writer.writerow([rec.k, i, fmt(rec.mean_reward[i]), rec.end - rec.start, fmt(rec.eta),
                                 fmt(rec.mean_reward_post[i]), fmt(reward_sums[i] / rec.k),
                                 fmt(gap[1]) if gap else "", fmt(gap[2]) if gap else ""])
            if itf is not None and rec.rho is not None:
                itf.write(json.dumps({"episode": rec.k, "eta": rec.eta,
                                      "rho": [r.tolist() for r in rec.rho]}) + "\n")
            every = cfg.logging.checkpoint_every
            if every and rec.k % every == 0:
                fh.flush()
                if itf is not None:
                    itf.flush()
                _write_checkpoint(out, learner, header, reward_sums)
            if not quiet and rec.k % 500 == 0:
                print(f"episode {rec.k}: mean reward {np.round(reward_sums / rec.k, 4).tolist()}")
    except Exception as exc:
        fh.close()
        if itf is not None:
            itf.close()
        raise RuntimeError(f"episode {learner.k + 1}: {exc}") from exc
    fh.close()
    if itf is not None:
        itf.close()
    _write_checkpoint(out, learner, header, reward_sums)
    wall = time.perf_counter() - start
    summary = {"episodes": learner.k, "wall_time_s": wall, **header,
               "final_running_mean": (reward_sums / max(learner.k, 1)).tolist(),
               "policy_floor_hits": sum(p.floored for p in learner.players)}
    if learner.log.gaps:
        k, avg, bar = learner.log.gaps[-1]
        # a gap below eps/2 on the shrunk sets certifies an eps-equilibrium on the full sets
        summary.update(gap_episode=k, averaged_gap=avg, gap_rho_bar=bar,
                       eps_equilibrium=bool(bar < cfg.epsilon / 2))
    with open(out / "summary.txt", "w") as f:
        for key, val in summary.items():
            f.write(f"{key}: {val}\n")
    return summary


def _write_checkpoint(out: Path, learner: Learner, header: dict, reward_sums):
    doc = dict(header, learner=learner.state_dict(), reward_sums=reward_sums.tolist())
    text = json.dumps(doc)
    (out / "checkpoints" / f"ckpt_{learner.k:07d}.json").write_text(text)
    (out / "checkpoint.json").write_text(text)


def _truncate_csv(path: Path, k: int):
    rows = list(csv.reader(open(path, newline="")))
    keep = [rows[0]] + [r for r in rows[1:] if int(r[0]) <= k]
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(keep)


def _truncate_jsonl(path: Path, k: int):
    if not path.exists():
        return
    lines = path.read_text().splitlines()
    keep = lines[:1] + [ln for ln in lines[1:] if json.loads(ln)["episode"] <= k]
    path.write_text("".join(ln + "\n" for ln in keep))


# ---------------------------------------------------------------- gap files


def gap_report(source, game: GameConfig, out_csv) -> list:
    """Averaged gap and gap of the running average at each point of a saved run.

    ``source`` is either an ``iterates.jsonl`` file (one evaluation per stored
    iterate; thinned runs average only the stored iterates) or a checkpoint.
    """
    from .metrics import GapAccumulator, ni_gap
    from .occupancy import build_polytope, shrink

    source = Path(source)
    if not source.exists():
        raise FileNotFoundError(f"{source} does not exist")
    table = game.reward_table()
    rows = []
    if source.suffix == ".jsonl":
        lines = source.read_text().splitlines()
        header = json.loads(lines[0])
        _check_hash(header, game)
        polys = [shrink(build_polytope(c), dl, i) for i, (c, dl) in enumerate(zip(game.chains, header["deltas"]))]
        acc = GapAccumulator(game, table)
        bar = [np.zeros(p.dim) for p in polys]
        for ln in lines[1:]:
            it = json.loads(ln)
            rhos = [np.array(r) for r in it["rho"]]
            acc.add(rhos, it["eta"])
            bar = [b + it["eta"] / acc.weight * (r - b) for b, r in zip(bar, rhos)]
            rows.append((it["episode"], acc.gap(polys), ni_gap(game, bar, polys, table)))
    else:
        ck = json.loads(source.read_text())
        _check_hash(ck, game)
        polys = [shrink(build_polytope(c), dl, i) for i, (c, dl) in enumerate(zip(game.chains, ck["deltas"]))]
        st = ck["learner"]
        bar = [np.array(r) for r in st["rho_bar"]]
        avg = float("nan")
        if "gap_acc" in st:
            acc = GapAccumulator(game, table)
            acc.grad = [np.array(g) for g in st["gap_acc"]["grad"]]
            acc.pay = np.array(st["gap_acc"]["pay"])
            acc.weight = st["gap_acc"]["weight"]
            avg = acc.gap(polys)
        rows.append((st["episode"], avg, ni_gap(game, bar, polys, table)))
    with open(out_csv, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "averaged_gap", "gap_rho_bar"])
        for k, a, b in rows:
            w.writerow([k, fmt(a), fmt(b)])
    return rows


def _check_hash(doc, game):
    if doc.get("game_hash") != game.digest():
        raise ValueError("game hash mismatch: the saved run was produced on a different game")


# ---------------------------------------------------------------- reproduction


def preset_config(name: str, n: int, lam: float, episodes: int = 5000, seed: int = 0,
                  out: str = "runs", G=4) -> ExperimentConfig:
    """The smart-grid experiment configuration (C=7, d=500, 1000 x^2, 0.02/l, delta=1/(20*64))."""
    from .config import LoggingConfig
    return ExperimentConfig(
        game={"preset": "smart_grid", "n": n, "C": 7, "G": G, "lambda": lam},
        algo="DA",
        regularizer={"kind": "quadratic", "coef": 1000.0},
        schedule={"kind": "scaled_inverse", "c": 0.02},
        d=500,
        delta=1.0 / (20 * 64),
        episodes=episodes,
        seed=seed,
        logging=LoggingConfig(thin=0, gap_every=0, checkpoint_every=1000),
        out=str(Path(out) / name),
    )


def reward_curve(csv_path) -> np.ndarray:
    """Per-episode mean rewards as an (episodes, players) array."""
    data = {}
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            data.setdefault(int(row["episode"]), {})[int(row["player"])] = float(row["mean_reward"])
    if not data:
        return np.zeros((0, 0))
    n = len(next(iter(data.values())))
    return np.array([[data[k][i] for i in range(n)] for k in sorted(data)])


def trend_stats(curve: np.ndarray, window: int = WINDOW, settle: int = SETTLE) -> dict:
    """Trailing-window mean at the end and max-min of the windowed mean after ``settle``."""
    K = len(curve)
    if K < window:
        return {"trailing_mean": curve.mean(axis=0).tolist(), "oscillation": [float("nan")] * curve.shape[1]}
    cs = np.vstack([np.zeros(curve.shape[1]), np.cumsum(curve, axis=0)])
    rolling = (cs[window:] - cs[:-window]) / window  # rolling[j] ends at episode j + window
    ends = np.arange(window, K + 1)
    after = rolling[ends >= settle]
    if len(after) == 0:  # run too short to judge stabilisation
        osc = [float("nan")] * curve.shape[1]
    else:
        osc = (after.max(axis=0) - after.min(axis=0)).tolist()
    return {"trailing_mean": rolling[-1].tolist(), "oscillation": osc}
