"""Command line: ``python -m mcnfsp {train,eval,compare}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiment import ALGOS, ConfigError, compare, evaluate_checkpoints, parse_config, run
from .games import GAME_NAMES
from .nn import CheckpointError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcnfsp", description="Fictitious self-play experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run one experiment")
    train.add_argument("--game", choices=GAME_NAMES)
    train.add_argument("--algo", choices=ALGOS)
    train.add_argument("--config", type=Path, help="key = value config file (a manifest.ini works too)")
    train.add_argument("--seed", type=int)
    train.add_argument("--out", type=Path, required=True)
    train.add_argument("--time-budget-s", type=float)

    ev = sub.add_parser("eval", help="exploitability of saved policy networks")
    ev.add_argument("--checkpoint", type=Path, nargs="+", required=True, help="one shared or one per player")
    ev.add_argument("--game", choices=GAME_NAMES, required=True)

    cmp_ = sub.add_parser("compare", help="tabulate finished runs on one game")
    cmp_.add_argument("dirs", type=Path, nargs="+")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            text = args.config.read_text(encoding="utf-8") if args.config else ""
            cfg = parse_config(text, game=args.game, algo=args.algo, seed=args.seed,
                               time_budget_s=args.time_budget_s)
            out = run(cfg, args.out)
            print(f"wrote {out / 'metrics.csv'}")
        elif args.command == "eval":
            report = evaluate_checkpoints(args.game, [str(p) for p in args.checkpoint])
            print(f"br_value_p0\t{report.br_value_p0:.6f}")
            print(f"br_value_p1\t{report.br_value_p1:.6f}")
            print(f"exploitability\t{report.epsilon:.6f}\t({report.units})")
        else:
            print(compare(args.dirs).render())
    except (ConfigError, CheckpointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
