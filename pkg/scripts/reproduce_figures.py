"""Run the smart-grid figure presets and, optionally, a regulariser sweep for fig2.

    python scripts/reproduce_figures.py --out runs/figs
    python scripts/reproduce_figures.py --out runs/figs --coef-sweep 1000 1 0.01 1e-4
"""

import argparse
from dataclasses import replace
from pathlib import Path

from stochgame_da.cli import main as cli_main
from stochgame_da.experiment import preset_config, reward_curve, run_experiment, trend_stats


def coef_sweep(coefs, out, episodes, seed):
    for c in coefs:
        cfg = preset_config(f"fig2_n2_coef{c:g}", 2, 0.0, episodes, seed, out)
        cfg = replace(cfg, regularizer={"kind": "quadratic", "coef": float(c)})
        run_experiment(cfg)
        stats = trend_stats(reward_curve(Path(cfg.out) / "trajectory.csv"))
        print(f"coef {c:g}: trailing-500 mean {[round(m, 3) for m in stats['trailing_mean']]}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs/figures")
    ap.add_argument("--episodes", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--coef-sweep", type=float, nargs="*", default=None)
    args = ap.parse_args()
    for fig in ("fig2", "fig3a", "fig3b"):
        cli_main(["reproduce", fig, "--out", args.out, "--episodes", str(args.episodes),
                  "--seed", str(args.seed)])
    if args.coef_sweep:
        coef_sweep(args.coef_sweep, args.out, args.episodes, args.seed)
