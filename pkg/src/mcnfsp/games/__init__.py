from .base import (
    CHANCE,
    TERMINAL,
    Game,
    GameError,
    State,
    apply_action,
    encode_observation,
    legal_actions,
    opponent,
    sample_chance,
    terminal_payoff,
)
from .leduc import Leduc
from .normal_form import NormalFormGame, matching_pennies, payoff_matrix, rock_paper_scissors
from .othello import Othello

_FACTORIES = {
    "matching_pennies": matching_pennies,
    "rps": rock_paper_scissors,
    "othello4": Othello,
    "leduc": Leduc,
}
_CACHE: dict[str, Game] = {}

GAME_NAMES = tuple(_FACTORIES)


def load_game(name: str) -> Game:
    """Return the shared instance of the game registered under ``name``."""
    if name not in _FACTORIES:
        raise GameError(f"unknown game {name!r}; choose from {', '.join(_FACTORIES)}")
    if name not in _CACHE:
        _CACHE[name] = _FACTORIES[name]()
    return _CACHE[name]


__all__ = [
    "CHANCE",
    "TERMINAL",
    "GAME_NAMES",
    "Game",
    "GameError",
    "Leduc",
    "NormalFormGame",
    "Othello",
    "State",
    "apply_action",
    "encode_observation",
    "legal_actions",
    "load_game",
    "matching_pennies",
    "opponent",
    "payoff_matrix",
    "rock_paper_scissors",
    "sample_chance",
    "terminal_payoff",
]
