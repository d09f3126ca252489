"""4x4 Othello on bitboards.

Player 0 is black and moves first.  Actions 0..15 are board cells in row-major
order, action 16 is a pass.  A player without a flipping move must pass; the
game ends when neither side can move.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .base import TERMINAL, Game, GameError, State

SIZE = 4
CELLS = SIZE * SIZE
PASS = CELLS
_FULL = (1 << CELLS) - 1
_SHIFTS = np.arange(CELLS, dtype=np.int64)
_DIRECTIONS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def _rays(cell: int) -> list[list[int]]:
    r, c = divmod(cell, SIZE)
    out = []
    for dr, dc in _DIRECTIONS:
        ray = []
        rr, cc = r + dr, c + dc
        while 0 <= rr < SIZE and 0 <= cc < SIZE:
            ray.append(rr * SIZE + cc)
            rr, cc = rr + dr, cc + dc
        if len(ray) >= 2:
            out.append(ray)
    return out


_RAYS = [_rays(cell) for cell in range(CELLS)]


def _flips(own: int, opp: int, cell: int) -> int:
    flipped = 0
    for ray in _RAYS[cell]:
        line = 0
        for sq in ray:
            bit = 1 << sq
            if opp & bit:
                line |= bit
            elif own & bit:
                flipped |= line
                break
            else:
                break
    return flipped


@lru_cache(maxsize=None)
def _moves(own: int, opp: int) -> tuple[tuple[int, int], ...]:
    empty = ~(own | opp) & _FULL
    out = []
    for cell in range(CELLS):
        if empty >> cell & 1:
            f = _flips(own, opp, cell)
            if f:
                out.append((cell, f))
    return tuple(out)


def _popcount(x: int) -> int:
    return bin(x).count("1")


class OthelloState(State):
    __slots__ = ("game", "black", "white", "to_move", "_player")

    def __init__(self, game: "Othello", black: int, white: int, to_move: int):
        self.game = game
        self.black = black
        self.white = white
        self.to_move = to_move
        own, opp = self._sides(to_move)
        if _moves(own, opp):
            self._player = to_move
        elif _moves(opp, own):
            self._player = to_move  # forced pass
        else:
            self._player = TERMINAL

    def _sides(self, player: int) -> tuple[int, int]:
        return (self.black, self.white) if player == 0 else (self.white, self.black)

    @property
    def current_player(self) -> int:
        return self._player

    def legal_actions(self) -> list[int]:
        self._check_decision()
        moves = _moves(*self._sides(self.to_move))
        if not moves:
            return [PASS]
        return [cell for cell, _ in moves]

    def apply(self, action: int) -> "OthelloState":
        self._check_decision()
        own, opp = self._sides(self.to_move)
        moves = _moves(own, opp)
        if action == PASS:
            if moves:
                raise GameError("pass is only legal without a flipping move")
            return OthelloState(self.game, self.black, self.white, 1 - self.to_move)
        for cell, flipped in moves:
            if cell == action:
                own |= flipped | (1 << cell)
                opp &= ~flipped
                break
        else:
            raise GameError(f"illegal Othello move {action} in\n{self}")
        black, white = (own, opp) if self.to_move == 0 else (opp, own)
        return OthelloState(self.game, black, white, 1 - self.to_move)

    def disc_counts(self) -> tuple[int, int]:
        return _popcount(self.black), _popcount(self.white)

    def returns(self) -> tuple[float, float]:
        self._check_terminal()
        b, w = self.disc_counts()
        s = float(np.sign(b - w))
        return (s, -s)

    def observation(self, player: int) -> np.ndarray:
        """Black plane, white plane, then 1.0 if ``player`` plays black."""
        obs = np.empty(2 * CELLS + 1, dtype=np.float32)
        obs[:CELLS] = (self.black >> _SHIFTS) & 1
        obs[CELLS : 2 * CELLS] = (self.white >> _SHIFTS) & 1
        obs[-1] = 1.0 if player == 0 else 0.0
        return obs

    def info_key(self, player: int) -> tuple:
        return (player, self.black, self.white, self.to_move)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, OthelloState)
            and self.black == other.black
            and self.white == other.white
            and self.to_move == other.to_move
        )

    def __hash__(self) -> int:
        return hash((self.black, self.white, self.to_move))

    def __str__(self) -> str:
        rows = []
        for r in range(SIZE):
            row = ""
            for c in range(SIZE):
                bit = 1 << (r * SIZE + c)
                row += "X" if self.black & bit else "O" if self.white & bit else "."
            rows.append(row)
        side = "terminal" if self.is_terminal() else ("X" if self.to_move == 0 else "O") + " to move"
        return "\n".join(rows) + f"\n{side}"


class Othello(Game):
    name = "othello4"
    num_actions = CELLS + 1
    observation_size = 2 * CELLS + 1
    action_names = tuple(f"{'abcd'[c % SIZE]}{c // SIZE + 1}" for c in range(CELLS)) + ("pass",)
    perfect_information = True
    payoff_units = "win/loss (+1/-1, draw 0)"

    def initial_state(self) -> OthelloState:
        # standard diagonal centre: white on the main diagonal
        white = (1 << 5) | (1 << 10)
        black = (1 << 6) | (1 << 9)
        return OthelloState(self, black, white, 0)

    def state_from_board(self, board: str, to_move: int) -> OthelloState:
        """Build a position from 16 chars of 'X', 'O', '.' (row-major)."""
        board = "".join(board.split())
        if len(board) != CELLS:
            raise GameError("board needs 16 cells")
        black = sum(1 << i for i, ch in enumerate(board) if ch == "X")
        white = sum(1 << i for i, ch in enumerate(board) if ch == "O")
        return OthelloState(self, black, white, to_move)
