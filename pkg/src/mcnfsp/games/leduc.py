"""Modified two-player Leduc Hold'em.

Six cards (ranks J, Q, K in two suits; card index ``i`` has rank ``i // 2``),
ante 1 chip each, fixed raise size 2 in both rounds and at most two raises per
betting round.  Player 0 opens both rounds.  Fold is legal at every decision
point.  A pair with the public card beats any non-pair, otherwise the higher
rank wins and equal ranks split the pot.
"""

from __future__ import annotations

import numpy as np

from .base import CHANCE, TERMINAL, Game, GameError, State

FOLD, CALL, RAISE = 0, 1, 2
DECK = 6
ANTE = 1
RAISE_SIZE = 2
MAX_RAISES = 2
HISTORY_BITS = 16  # player x round x slot x {call, raise}
OBS_SIZE = HISTORY_BITS + DECK

_ACTION_NAMES = ("fold", "call", "raise")


def card_name(card: int) -> str:
    return "JQK"[card // 2] + "sh"[card % 2]


def _round_over(seq: tuple[int, ...]) -> bool:
    return len(seq) >= 2 and seq[-1] == CALL


def _round_bets(seq: tuple[int, ...]) -> list[int]:
    level, bet = 0, [0, 0]
    for i, a in enumerate(seq):
        if a == RAISE:
            level += RAISE_SIZE
            bet[i % 2] = level
        elif a == CALL:
            bet[i % 2] = level
    return bet


class LeducState(State):
    __slots__ = ("game", "cards", "rounds", "_player", "_round")

    def __init__(self, game: "Leduc", cards: tuple[int, ...] = (), rounds=((), ())):
        self.game = game
        self.cards = cards
        self.rounds = rounds
        r0, r1 = rounds
        self._round = 0
        if len(cards) < 2:
            self._player = CHANCE
        elif FOLD in r0 or FOLD in r1:
            self._player = TERMINAL
        elif not _round_over(r0):
            self._player = len(r0) % 2
        elif len(cards) < 3:
            self._player = CHANCE
        else:
            self._round = 1
            self._player = TERMINAL if _round_over(r1) else len(r1) % 2

    @property
    def current_player(self) -> int:
        return self._player

    @property
    def betting_round(self) -> int:
        return self._round

    def chance_outcomes(self) -> list[tuple[int, float]]:
        if not self.is_chance():
            raise GameError("not a chance node")
        remaining = [c for c in range(DECK) if c not in self.cards]
        p = 1.0 / len(remaining)
        return [(c, p) for c in remaining]

    def legal_actions(self) -> list[int]:
        self._check_decision()
        if self.rounds[self._round].count(RAISE) < MAX_RAISES:
            return [FOLD, CALL, RAISE]
        return [FOLD, CALL]

    def apply(self, action: int) -> "LeducState":
        if self.is_chance():
            if action in self.cards or not 0 <= action < DECK:
                raise GameError(f"card {action} cannot be dealt")
            return LeducState(self.game, self.cards + (int(action),), self.rounds)
        if action not in self.legal_actions():
            raise GameError(f"illegal Leduc action {action} at {self}")
        rounds = list(self.rounds)
        rounds[self._round] = rounds[self._round] + (int(action),)
        return LeducState(self.game, self.cards, tuple(rounds))

    def contributions(self) -> list[int]:
        b0 = _round_bets(self.rounds[0])
        b1 = _round_bets(self.rounds[1])
        return [ANTE + b0[0] + b1[0], ANTE + b0[1] + b1[1]]

    def returns(self) -> tuple[float, float]:
        self._check_terminal()
        contrib = self.contributions()
        for seq in self.rounds:
            if seq and seq[-1] == FOLD:
                folder = (len(seq) - 1) % 2
                lost = float(contrib[folder])
                return (-lost, lost) if folder == 0 else (lost, -lost)
        winner = self._showdown_winner()
        if winner is None:
            return (0.0, 0.0)
        won = float(contrib[1 - winner])
        return (won, -won) if winner == 0 else (-won, won)

    def _showdown_winner(self):
        public = self.cards[2] // 2
        ranks = [self.cards[0] // 2, self.cards[1] // 2]
        pairs = [r == public for r in ranks]
        if pairs[0] != pairs[1]:
            return 0 if pairs[0] else 1
        if ranks[0] == ranks[1]:
            return None
        return 0 if ranks[0] > ranks[1] else 1

    def observation(self, player: int) -> np.ndarray:
        obs = np.zeros(OBS_SIZE, dtype=np.float32)
        for rnd, seq in enumerate(self.rounds):
            slots = [0, 0]
            for i, a in enumerate(seq):
                actor = i % 2
                if a != FOLD:
                    idx = ((actor * 2 + rnd) * 2 + slots[actor]) * 2 + (a - CALL)
                    obs[idx] = 1.0
                slots[actor] += 1
        if len(self.cards) > player:
            obs[HISTORY_BITS + self.cards[player]] = 1.0
        if len(self.cards) == 3:
            obs[HISTORY_BITS + self.cards[2]] = 1.0
        return obs

    def info_key(self, player: int) -> tuple:
        private = self.cards[player] if len(self.cards) > player else None
        public = self.cards[2] if len(self.cards) == 3 else None
        return (player, private, public, self.rounds)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LeducState)
            and self.cards == other.cards
            and self.rounds == other.rounds
        )

    def __hash__(self) -> int:
        return hash((self.cards, self.rounds))

    def __str__(self) -> str:
        cards = [card_name(c) for c in self.cards] + ["-"] * (3 - len(self.cards))
        lines = [" ".join(_ACTION_NAMES[a] for a in seq) or "-" for seq in self.rounds]
        return (
            f"p0={cards[0]} p1={cards[1]} public={cards[2]} "
            f"| r1: {lines[0]} | r2: {lines[1]} | pot={sum(self.contributions())}"
        )


class Leduc(Game):
    name = "leduc"
    num_actions = 3
    observation_size = OBS_SIZE
    action_names = _ACTION_NAMES
    payoff_units = f"chips (ante {ANTE}, fixed raise {RAISE_SIZE}, {MAX_RAISES} raises per round)"

    def initial_state(self) -> LeducState:
        return LeducState(self)
