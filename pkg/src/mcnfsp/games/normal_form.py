"""Matching Pennies and Rock-Paper-Scissors as one-shot games.

Each game is played as two sequential moves where the second mover cannot see
the first move, so the extensive-form machinery (tree walk, self-play loops)
applies unchanged.  Player 0 is the row player.
"""

from __future__ import annotations

import numpy as np

from .base import TERMINAL, Game, GameError, State

_CONSTANT_OBS = np.ones(1, dtype=np.float32)
_CONSTANT_OBS.setflags(write=False)


class NormalFormState(State):
    __slots__ = ("game", "moves")

    def __init__(self, game: "NormalFormGame", moves: tuple[int, ...] = ()):
        self.game = game
        self.moves = moves

    @property
    def current_player(self) -> int:
        return TERMINAL if len(self.moves) == 2 else len(self.moves)

    def legal_actions(self) -> list[int]:
        self._check_decision()
        return list(range(self.game.num_actions))

    def apply(self, action: int) -> "NormalFormState":
        if self.is_terminal():
            raise GameError("game is over")
        if not 0 <= action < self.game.num_actions:
            raise GameError(f"illegal action {action} in {self.game.name}")
        return NormalFormState(self.game, self.moves + (int(action),))

    def returns(self) -> tuple[float, float]:
        self._check_terminal()
        u = float(self.game.matrix[self.moves[0], self.moves[1]])
        return (u, -u)

    def observation(self, player: int) -> np.ndarray:
        return _CONSTANT_OBS

    def info_key(self, player: int) -> tuple:
        return (player,)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, NormalFormState)
            and other.game is self.game
            and other.moves == self.moves
        )

    def __hash__(self) -> int:
        return hash((self.game.name, self.moves))

    def __str__(self) -> str:
        names = [self.game.action_names[a] for a in self.moves]
        return f"{self.game.name}: moves={names}"


class NormalFormGame(Game):
    normal_form = True
    observation_size = 1

    def __init__(self, name: str, matrix, action_names: tuple[str, ...]):
        self.name = name
        self.matrix = np.asarray(matrix, dtype=np.float64)
        self.matrix.setflags(write=False)
        self.num_actions = self.matrix.shape[0]
        self.action_names = action_names

    def initial_state(self) -> NormalFormState:
        return NormalFormState(self)

    def payoff_matrix(self) -> np.ndarray:
        return self.matrix.copy()


def matching_pennies() -> NormalFormGame:
    # row player wins on a match
    return NormalFormGame(
        "matching_pennies", [[1.0, -1.0], [-1.0, 1.0]], ("heads", "tails")
    )


def rock_paper_scissors() -> NormalFormGame:
    return NormalFormGame(
        "rps",
        [[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]],
        ("rock", "paper", "scissors"),
    )


def payoff_matrix(game: Game) -> np.ndarray:
    """Row-player payoff matrix of a normal-form game."""
    if not isinstance(game, NormalFormGame):
        raise GameError(f"{game.name} is not a normal-form game")
    return game.payoff_matrix()
