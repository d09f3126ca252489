"""ANFSP against NFSP on Leduc Hold'em under an equal wall-clock budget.

Set MCNFSP_MAX_WORKERS to cap the ANFSP thread count on small machines.
"""

import argparse
import csv
from pathlib import Path

from mcnfsp.anfsp import AnfspConfig
from mcnfsp.experiment import Budget, ExperimentConfig, compare, run


def episodes_done(run_dir: Path) -> int:
    with open(run_dir / "metrics.csv", newline="") as fh:
        return int(list(csv.DictReader(fh))[-1]["episodes"])


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("runs/leduc"))
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--seconds", type=float, default=600.0)
    parser.add_argument("--eval-every", type=int, default=10_000)
    parser.add_argument("--workers", type=int, default=4)
    args = parser.parse_args()

    dirs = []
    for seed in args.seeds:
        budget = Budget(eval_every=args.eval_every, time_budget_s=args.seconds)
        nfsp = run(ExperimentConfig("leduc", "nfsp", seed, budget), args.out / f"nfsp_{seed}")
        anfsp = run(ExperimentConfig("leduc", "anfsp", seed, budget, AnfspConfig(workers=args.workers)),
                    args.out / f"anfsp_{seed}")
        n, a = episodes_done(nfsp), episodes_done(anfsp)
        print(f"seed {seed}: episodes nfsp={n} anfsp={a} ratio={a / n:.2f}", flush=True)
        dirs += [nfsp, anfsp]
    print(compare(dirs).render())


if __name__ == "__main__":
    main()
