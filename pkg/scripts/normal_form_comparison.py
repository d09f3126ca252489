"""Fictitious play against NFSP on Matching Pennies and Rock-Paper-Scissors.

Writes one run directory per (game, algorithm, seed) under ``--out`` and prints
the aligned exploitability table for each game.
"""

import argparse
from pathlib import Path

from mcnfsp.experiment import Budget, ExperimentConfig, compare, run
from mcnfsp.nfsp import nfsp_config_for


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("runs/normal_form"))
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--fp-iterations", type=int, default=2000)
    parser.add_argument("--nfsp-episodes", type=int, default=20_000)
    parser.add_argument("--eval-every", type=int, default=1000)
    args = parser.parse_args()

    for game in ("matching_pennies", "rps"):
        dirs = [run(ExperimentConfig(game, "fp", budget=Budget(iterations=args.fp_iterations)),
                    args.out / game / "fp")]
        for seed in args.seeds:
            budget = Budget(episodes=args.nfsp_episodes, eval_every=args.eval_every)
            cfg = ExperimentConfig(game, "nfsp", seed, budget, nfsp_config_for(game))
            dirs.append(run(cfg, args.out / game / f"nfsp_{seed}"))
        print(f"== {game}")
        print(compare(dirs).render())


if __name__ == "__main__":
    main()
