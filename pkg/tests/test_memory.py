import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcnfsp.memory import CircularBuffer, MemoryNotReady, ReservoirBuffer, reservoir_slot


def retention_frequencies(capacity, stream, trials, seed):
    """Fraction of trials in which each stream position survives."""
    rng = np.random.default_rng(seed)
    slots = np.tile(np.arange(capacity), (trials, 1))
    rows = np.arange(trials)
    for seen in range(capacity + 1, stream + 1):
        s = reservoir_slot(seen, capacity, rng, size=trials)
        hit = s >= 0
        slots[rows[hit], s[hit]] = seen - 1
    counts = np.bincount(slots.ravel(), minlength=stream)
    return counts / trials


@given(st.integers(1, 20), st.lists(st.integers(), max_size=60))
def test_circular_buffer_keeps_latest_in_order(capacity, items):
    buf = CircularBuffer(capacity)
    for x in items:
        buf.push(x)
    assert list(buf) == items[-capacity:] if items else list(buf) == []
    assert len(buf) == min(capacity, len(items))


@given(st.integers(1, 16), st.integers(0, 200), st.integers(0, 2**32 - 1))
@settings(max_examples=80)
def test_reservoir_size_and_membership(capacity, n, seed):
    rng = np.random.default_rng(seed)
    buf = ReservoirBuffer(capacity)
    for i in range(n):
        buf.push(i, rng)
    kept = list(buf)
    assert len(kept) == min(capacity, n) and buf.seen == n
    assert len(set(kept)) == len(kept) and all(0 <= x < n for x in kept)


def test_reservoir_fills_before_replacing():
    buf = ReservoirBuffer(3)
    rng = np.random.default_rng(0)
    for i in range(3):
        buf.push(i, rng)
    assert list(buf) == [0, 1, 2]


def test_retention_is_uniform_small_scale():
    # 8 of 40 retained: every position survives with probability 0.2
    freq = retention_frequencies(8, 40, 20_000, seed=1)
    se = np.sqrt(0.2 * 0.8 / 20_000)
    assert np.all(np.abs(freq - 0.2) < 4.5 * se)


def test_scalar_and_vector_slots_agree():
    a = [reservoir_slot(50, 10, np.random.default_rng(3)) for _ in range(1)]
    b = reservoir_slot(50, 10, np.random.default_rng(3), size=1)
    assert a[0] == b[0]


def test_sampling_from_empty_buffer_raises():
    with pytest.raises(MemoryNotReady):
        CircularBuffer(2).sample(1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        ReservoirBuffer(0)
