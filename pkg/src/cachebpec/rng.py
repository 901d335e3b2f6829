"""Named random substreams derived from one master seed.

Each consumer (library content, cache placement, channel, coding
coefficients) gets its own generator, so changing how many coefficients the
encoder draws never shifts the erasure sample path.
"""

from __future__ import annotations

import numpy as np

STREAMS = {"library": 0, "placement": 1, "channel": 2, "coding": 3, "demands": 4}


def substream(seed: int, name: str, replica: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(replica, STREAMS[name]))
    return np.random.default_rng(ss)


class CoefficientSource:
    """Buffered draws of nonzero GF(2^8) coefficients."""

    def __init__(self, rng: np.random.Generator, block: int = 1 << 15):
        self._rng = rng
        self._block = block
        self._buf: list[int] = []
        self._pos = 0

    def __call__(self) -> int:
        if self._pos == len(self._buf):
            self._buf = self._rng.integers(1, 256, size=self._block).tolist()
            self._pos = 0
        c = self._buf[self._pos]
        self._pos += 1
        return c
