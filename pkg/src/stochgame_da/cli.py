"""Command line entry point: ``stochgame {run,gap,validate,reproduce}``.

Exit codes: 0 success, 1 validation or runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, EnumerationTooLarge

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _parse_seeds(text: str) -> list:
    seeds = []
    for part in text.split(","):
        if "-" in part:
            a, b = part.split("-")
            seeds.extend(range(int(a), int(b) + 1))
        elif part:
            seeds.append(int(part))
    return seeds


def _run_one(args):
    cfg, resume, tau, fixed = args
    from .experiment import run_experiment
    return run_experiment(cfg, resume=resume, tau_override=tau, fixed_len=fixed)


def cmd_run(ns) -> int:
    from .config import load_config
    try:
        cfg = load_config(ns.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if ns.seed is not None:
        cfg.seed = ns.seed
    if ns.episodes is not None:
        cfg.episodes = ns.episodes
    if ns.out is not None:
        cfg.out = ns.out
    if ns.seeds:
        if ns.resume:
            print("--resume applies to a single run, not a seed sweep", file=sys.stderr)
            return EXIT_USAGE
        jobs = [(replace(cfg, seed=s, out=str(Path(cfg.out) / f"seed_{s}")), None,
                 ns.tau_override, ns.fixed_batch_len) for s in _parse_seeds(ns.seeds)]
    else:
        jobs = [(cfg, ns.resume, ns.tau_override, ns.fixed_batch_len)]
    try:
        if ns.jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
                summaries = list(pool.map(_run_one, jobs))
        else:
            summaries = [_run_one(j) for j in jobs]
    except Exception as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    for (c, *_), s in zip(jobs, summaries):
        extra = f", averaged gap {s['averaged_gap']:.4g}" if "averaged_gap" in s else ""
        print(f"{c.out}: {s['episodes']} episodes in {s['wall_time_s']:.1f}s{extra}")
    return EXIT_OK


def cmd_gap(ns) -> int:
    from .experiment import gap_report
    from .game import GameConfig
    try:
        game = GameConfig.from_json(Path(ns.game).read_text())
        out = ns.out or str(Path(ns.source).with_name("gap.csv"))
        rows = gap_report(ns.source, game, out)
    except EnumerationTooLarge as exc:
        print(f"refusing: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (OSError, ValueError) as exc:
        print(f"gap failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if rows:
        k, a, b = rows[-1]
        print(f"episode {k}: averaged gap {a:.6g}, gap of running average {b:.6g} -> {out}")
    return EXIT_OK


def cmd_validate(ns) -> int:
    from .validation import run_suites
    ok = run_suites(ns.level, ns.inject_fault)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_reproduce(ns) -> int:
    from .experiment import PRESETS, preset_config, reward_curve, run_experiment, trend_stats
    out_root = Path(ns.out or "runs/reproduce")
    seed = 0 if ns.seed is None else ns.seed
    episodes = 5000 if ns.episodes is None else ns.episodes
    cfgs = [preset_config(name, n, lam, episodes, seed, str(out_root), G=ns.G)
            for name, n, lam in PRESETS[ns.figure]]
    jobs = [(c, None, ns.tau_override, ns.fixed_batch_len) for c in cfgs]
    try:
        if ns.jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
                list(pool.map(_run_one, jobs))
        else:
            for j in jobs:
                _run_one(j)
    except Exception as exc:
        print(f"reproduce failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    with open(out_root / f"{ns.figure}_stats.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "player", "trailing_mean", "oscillation_after_settle"])
        for c in cfgs:
            stats = trend_stats(reward_curve(Path(c.out) / "trajectory.csv"))
            for i, (m, o) in enumerate(zip(stats["trailing_mean"], stats["oscillation"])):
                w.writerow([Path(c.out).name, i, format(m, ".17g"), format(o, ".17g")])
                print(f"{Path(c.out).name} player {i}: trailing-500 mean {m:.4f}, "
                      f"windowed oscillation after 2000 {o:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stochgame", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int)
        sp.add_argument("--episodes", type=int)
        sp.add_argument("--out")
        sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        sp.add_argument("--tau-override", type=float, help="use this mixing-time estimate")
        sp.add_argument("--fixed-batch-len", type=int, help="fixed-length batches (no cover stopping)")

    r = sub.add_parser("run", help="run a config-driven experiment")
    r.add_argument("--config", required=True)
    common(r)
    r.add_argument("--seeds", help="seed sweep, e.g. 0-4 or 0,3,7; one output dir per seed")
    r.add_argument("--resume", help="checkpoint JSON to continue from")
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("gap", help="evaluate gaps of a saved run")
    g.add_argument("source", help="iterates.jsonl or a checkpoint JSON")
    g.add_argument("--game", required=True, help="game JSON (e.g. the run's game.json)")
    g.add_argument("--out")
    g.set_defaults(func=cmd_gap)

    v = sub.add_parser("validate", help="run the self-check suites")
    v.add_argument("level", nargs="?", choices=["fast", "full"], default="fast")
    v.add_argument("--inject-fault", choices=["roundtrip", "projection", "lp", "bias", "independence"])
    v.set_defaults(func=cmd_validate)

    rp = sub.add_parser("reproduce", help="smart-grid figure runs")
    rp.add_argument("figure", choices=["fig2", "fig3a", "fig3b"])
    common(rp)
    rp.add_argument("--G", type=int, default=4, help="harvest bound (uniform on 0..G-1)")
    rp.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    return ns.func(ns)


if __name__ == "__main__":
    sys.exit(main())
