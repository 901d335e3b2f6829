from __future__ import annotations

import math

import numpy as np
import pytest

from cachebpec.channel import ERASURE, ErasureChannel, ScriptedChannel
from cachebpec.rng import substream


def _states(K, delta, n, seed=0):
    ch = ErasureChannel(K, delta, substream(seed, "channel"))
    for _ in range(n):
        ch.send(b"x")
    return np.array(ch.state_history())


def test_perfect_link_delivers_everything():
    ch = ErasureChannel(4, 0.0, substream(0, "channel"))
    for _ in range(100):
        state, outputs = ch.transmit(b"abc")
        assert state == 0b1111
        assert outputs == (b"abc",) * 4
    assert ch.slots == 100


def test_erasure_marker():
    ch = ScriptedChannel(3, [0b101])
    state, outputs = ch.transmit(b"p")
    assert state == 0b101
    assert outputs == (b"p", ERASURE, b"p")


def test_reception_rate_within_band():
    K, delta, n = 5, 0.3, 100_000
    s = _states(K, delta, n)
    sd = math.sqrt(delta * (1 - delta) / n)
    for k in range(K):
        rate = np.mean(s >> k & 1)
        assert abs(rate - (1 - delta)) < 4 * sd


def test_users_and_slots_independent():
    K, delta, n = 3, 0.4, 100_000
    s = _states(K, delta, n, seed=3)
    bits = np.stack([(s >> k & 1) for k in range(K)]).astype(float)
    corr = np.corrcoef(bits)
    assert np.all(np.abs(corr[np.triu_indices(K, 1)]) < 4 / math.sqrt(n))
    lag = np.corrcoef(bits[0, :-1], bits[0, 1:])[0, 1]
    assert abs(lag) < 4 / math.sqrt(n)
    # joint all-erased probability
    assert abs(np.mean(s == 0) - delta**K) < 4 * math.sqrt(delta**K / n)


def test_seed_determinism_and_substream_isolation():
    a = _states(4, 0.5, 5000, seed=9)
    b = _states(4, 0.5, 5000, seed=9)
    assert np.array_equal(a, b)
    # drawing coding coefficients in between must not perturb the channel
    ch = ErasureChannel(4, 0.5, substream(9, "channel"))
    coding = substream(9, "coding")
    for _ in range(5000):
        coding.integers(1, 256, 7)
        ch.send(None)
    assert np.array_equal(a, ch.state_history())


def test_rejects_bad_delta():
    with pytest.raises(ValueError):
        ErasureChannel(2, 1.0, substream(0, "channel"))
    with pytest.raises(ValueError):
        ErasureChannel(2, -0.1, substream(0, "channel"))


def test_scripted_channel_then_default():
    ch = ScriptedChannel(3, [0, 0b010])
    assert [ch.send(None) for _ in range(4)] == [0, 0b010, 0b111, 0b111]
    ch = ScriptedChannel(2, [], then=0b01)
    assert ch.send(None) == 0b01
