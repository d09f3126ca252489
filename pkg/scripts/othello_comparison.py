"""MC-NFSP against NFSP on 4x4 Othello over several seeds."""

import argparse
from pathlib import Path

from mcnfsp.experiment import Budget, ExperimentConfig, compare, run


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("runs/othello"))
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--episodes", type=int, default=5000)
    parser.add_argument("--eval-every", type=int, default=250)
    args = parser.parse_args()

    dirs = []
    for algo in ("mcnfsp", "nfsp"):
        for seed in args.seeds:
            budget = Budget(episodes=args.episodes, eval_every=args.eval_every)
            dirs.append(run(ExperimentConfig("othello4", algo, seed, budget), args.out / f"{algo}_{seed}"))
            print(f"finished {algo} seed {seed}", flush=True)
    print(compare(dirs).render())


if __name__ == "__main__":
    main()
