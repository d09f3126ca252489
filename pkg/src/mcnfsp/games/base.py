"""Common two-player zero-sum game interface.

States are immutable and hashable; ``apply`` returns a new state.  Player ids
are 0 and 1; chance and terminal nodes use the sentinels below.
"""

from __future__ import annotations

import abc

import numpy as np

CHANCE = -1
TERMINAL = -2


class GameError(ValueError):
    """Raised when a game operation is used outside its contract."""


def opponent(player: int) -> int:
    return 1 - player


class State(abc.ABC):
    """A full game position."""

    game: "Game"

    @property
    @abc.abstractmethod
    def current_player(self) -> int:
        """0, 1, CHANCE or TERMINAL."""

    def is_terminal(self) -> bool:
        return self.current_player == TERMINAL

    def is_chance(self) -> bool:
        return self.current_player == CHANCE

    @abc.abstractmethod
    def legal_actions(self) -> list[int]:
        ...

    def chance_outcomes(self) -> list[tuple[int, float]]:
        raise GameError(f"{type(self).__name__} has no chance nodes")

    @abc.abstractmethod
    def apply(self, action: int) -> "State":
        ...

    @abc.abstractmethod
    def returns(self) -> tuple[float, float]:
        """Terminal payoff per player."""

    @abc.abstractmethod
    def observation(self, player: int) -> np.ndarray:
        ...

    def info_key(self, player: int) -> tuple:
        """Hashable key identifying ``player``'s information set."""
        return (player, self.observation(player).tobytes())

    def legal_mask(self) -> np.ndarray:
        mask = np.zeros(self.game.num_actions, dtype=bool)
        mask[self.legal_actions()] = True
        return mask

    def _check_decision(self) -> None:
        if self.is_terminal():
            raise GameError("no actions at a terminal state")
        if self.is_chance():
            raise GameError("chance node: use chance_outcomes()")

    def _check_terminal(self) -> None:
        if not self.is_terminal():
            raise GameError("payoff requested for a non-terminal state")


class Game(abc.ABC):
    name: str = ""
    num_actions: int = 0
    observation_size: int = 0
    action_names: tuple[str, ...] = ()
    perfect_information: bool = False
    normal_form: bool = False
    payoff_units: str = "utility"

    @abc.abstractmethod
    def initial_state(self) -> State:
        ...

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


def legal_actions(state: State) -> list[int]:
    return state.legal_actions()


def apply_action(state: State, action: int) -> State:
    return state.apply(action)


def terminal_payoff(state: State) -> tuple[float, float]:
    return state.returns()


def encode_observation(state: State, player: int) -> np.ndarray:
    return state.observation(player)


def sample_chance(state: State, rng: np.random.Generator) -> int:
    outcomes = state.chance_outcomes()
    probs = np.array([p for _, p in outcomes])
    return outcomes[int(rng.choice(len(outcomes), p=probs))][0]
