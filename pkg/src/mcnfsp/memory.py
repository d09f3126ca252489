"""Replay memories: a FIFO circular buffer (RL) and a reservoir buffer (SL)."""

from __future__ import annotations

from typing import Generic, Iterator, NamedTuple, TypeVar

import numpy as np

T = TypeVar("T")


class MemoryNotReady(LookupError):
    """Sampling from an empty buffer; callers skip the training step."""


class Transition(NamedTuple):
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray | None
    next_legal: np.ndarray | None
    terminal: bool


class PolicyTarget(NamedTuple):
    """MC-NFSP experience: ``outcome`` is None for SL entries."""

    obs: np.ndarray
    policy: np.ndarray
    outcome: float | None = None


class _Buffer(Generic[T]):
    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list[T] = []

    def __len__(self) -> int:
        return len(self._items)

    def sample(self, k: int, rng: np.random.Generator) -> list[T]:
        """``k`` items drawn uniformly with replacement."""
        if not self._items:
            raise MemoryNotReady("buffer is empty")
        idx = rng.integers(len(self._items), size=k)
        return [self._items[i] for i in idx]


class CircularBuffer(_Buffer[T]):
    def __init__(self, capacity: int):
        super().__init__(capacity)
        self._cursor = 0

    def push(self, item: T) -> None:
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._cursor] = item
        self._cursor = (self._cursor + 1) % self.capacity

    def __iter__(self) -> Iterator[T]:
        if len(self._items) < self.capacity:
            return iter(list(self._items))
        return iter(self._items[self._cursor :] + self._items[: self._cursor])


def reservoir_slot(seen: int, capacity: int, rng: np.random.Generator, size=None):
    """Slot that the ``seen``-th item (1-based) overwrites under Algorithm R,
    or -1 to discard it.  Vectorises over ``size`` independent streams."""
    if seen <= capacity:
        return seen - 1 if size is None else np.full(size, seen - 1)
    j = rng.integers(seen, size=size)
    return np.where(j < capacity, j, -1) if size is not None else (int(j) if j < capacity else -1)


class ReservoirBuffer(_Buffer[T]):
    def __init__(self, capacity: int):
        super().__init__(capacity)
        self.seen = 0

    def push(self, item: T, rng: np.random.Generator) -> None:
        self.seen += 1
        slot = reservoir_slot(self.seen, self.capacity, rng)
        if slot == len(self._items):
            self._items.append(item)
        elif slot >= 0:
            self._items[slot] = item

    def __iter__(self) -> Iterator[T]:
        return iter(list(self._items))
