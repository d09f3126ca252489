"""Fictitious play on normal-form games."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exploitability import exploitability
from .games import GameError
from .games.normal_form import NormalFormGame
from .policies import FixedPolicy


def best_response_pure(payoff: np.ndarray, opponent_avg: np.ndarray) -> int:
    """Row action maximising expected payoff; lowest index among ties."""
    return int(np.argmax(np.asarray(payoff) @ np.asarray(opponent_avg)))


@dataclass
class FpRow:
    iteration: int
    avg0: np.ndarray
    avg1: np.ndarray
    exploitability: float


def run_fp(game: NormalFormGame, iterations: int, *, alternating: bool = True) -> list[FpRow]:
    """Run fictitious play from zero counts.

    With ``alternating`` (Brown's original scheme) the column player responds to
    the row average that already includes the row player's move of this
    iteration; otherwise both respond to the previous averages.
    """
    if not game.normal_form:
        raise GameError("fictitious play runs on normal-form games only")
    row_payoff = game.matrix
    col_payoff = -game.matrix.T
    counts = [np.zeros(game.num_actions), np.zeros(game.num_actions)]
    trace = []
    for t in range(1, iterations + 1):
        prev = [c / max(c.sum(), 1.0) for c in counts]
        a0 = best_response_pure(row_payoff, prev[1])
        if alternating:
            counts[0][a0] += 1
            a1 = best_response_pure(col_payoff, counts[0] / t)
        else:
            a1 = best_response_pure(col_payoff, prev[0])
            counts[0][a0] += 1
        counts[1][a1] += 1
        avg0, avg1 = counts[0] / t, counts[1] / t
        report = exploitability(game, (FixedPolicy(avg0), FixedPolicy(avg1)))
        trace.append(FpRow(t, avg0, avg1, report.epsilon))
    return trace
