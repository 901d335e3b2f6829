"""Memoryless K-user broadcast packet erasure channel with state feedback.

A channel state is an ``int`` bitmask of the users that received the slot.
The encoder only learns a slot's state as the return value of ``send``,
i.e. after it has committed that slot's payload.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

ERASURE = None


class ErasureChannel:
    """i.i.d. erasures with probability ``delta`` per user and slot."""

    def __init__(self, K: int, delta: float, rng: np.random.Generator, block: int = 4096):
        if not 0 <= delta < 1:
            raise ValueError("delta must lie in [0, 1)")
        self.K = K
        self.delta = delta
        self._rng = rng
        self._block = block
        self._weights = 1 << np.arange(K, dtype=np.int64)
        self._buf: list[int] = []
        self._pos = 0
        self.history: list[int] = []

    def _refill(self) -> None:
        u = self._rng.random((self._block, self.K))
        self._buf = ((u >= self.delta) @ self._weights).tolist()
        self._pos = 0

    def send(self, payload) -> int:
        """Transmit one slot and return its state."""
        if self._pos == len(self._buf):
            self._refill()
        s = self._buf[self._pos]
        self._pos += 1
        self.history.append(s)
        return s

    def transmit(self, payload) -> tuple[int, tuple]:
        """Transmit one slot; returns the state and every user's output."""
        s = self.send(payload)
        return s, tuple(payload if s >> k & 1 else ERASURE for k in range(self.K))

    @property
    def slots(self) -> int:
        return len(self.history)

    def state_history(self) -> list[int]:
        return list(self.history)


class ScriptedChannel(ErasureChannel):
    """Replays a fixed state sequence, then falls back to full reception."""

    def __init__(self, K: int, states: Sequence[int], then: int | None = None):
        self.K = K
        self.delta = 0.0
        self._script = list(states)
        self._then = (1 << K) - 1 if then is None else then
        self.history = []

    def send(self, payload) -> int:
        n = len(self.history)
        s = self._script[n] if n < len(self._script) else self._then
        self.history.append(s)
        return s
