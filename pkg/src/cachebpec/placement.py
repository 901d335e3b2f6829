"""Decentralized cache placement and the subfile partition it induces.

Every user independently stores, for every file, a uniformly random subset of
``quota = round(M*F/N)`` packet indices.  The placement link is error free.
Packet index sets are kept as sorted numpy arrays; subsets of users are
bitmasks over ``range(K)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO

import numpy as np

MAX_USERS = 16  # coding coefficients live in GF(256), so q > K needs K <= 16


@dataclass(frozen=True)
class SystemParams:
    K: int
    N: int
    M: float
    F: int
    delta: float
    P: int = 8
    seed: int = 0

    def __post_init__(self):
        if not 2 <= self.K <= MAX_USERS:
            raise ValueError(f"K must lie in [2, {MAX_USERS}], got {self.K}")
        if self.N < 1 or self.F < 1 or self.P < 1:
            raise ValueError("N, F and P must be positive")
        if not 0 <= self.M <= self.N:
            raise ValueError(f"M must lie in [0, N], got {self.M}")
        if not 0 <= self.delta < 1:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")

    @property
    def p(self) -> float:
        return self.M / self.N

    @property
    def quota(self) -> int:
        """Packets cached per (user, file); MF/N rounded half up."""
        return min(self.F, int(math.floor(self.M * self.F / self.N + 0.5)))

    @property
    def p_eff(self) -> float:
        """Caching fraction actually realized after rounding the quota."""
        return self.quota / self.F

    @property
    def M_eff(self) -> float:
        return self.N * self.quota / self.F


@dataclass
class Library:
    """N files of F packets, each packet P random bytes."""

    data: np.ndarray  # (N, F, P) uint8

    @property
    def N(self) -> int:
        return self.data.shape[0]

    @property
    def F(self) -> int:
        return self.data.shape[1]

    def packet(self, i: int, f: int) -> bytes:
        return self.data[i, f].tobytes()

    def file(self, i: int) -> list[bytes]:
        return [row.tobytes() for row in self.data[i]]


def generate_library(params: SystemParams, rng: np.random.Generator) -> Library:
    data = rng.integers(0, 256, size=(params.N, params.F, params.P), dtype=np.uint8)
    return Library(data)


@dataclass
class CacheTable:
    """Cache contents Z_k: packet indices per (user, file) plus payload copies."""

    K: int
    N: int
    F: int
    indices: list[list[np.ndarray]]  # [k][i] -> sorted indices
    payloads: list[list[np.ndarray]]  # [k][i] -> (quota, P) copies aligned with indices
    _lookup: dict = field(default_factory=dict, repr=False)

    def cached(self, k: int, i: int) -> np.ndarray:
        return self.indices[k][i]

    def contains(self, k: int, i: int, f: int) -> bool:
        idx = self.indices[k][i]
        pos = np.searchsorted(idx, f)
        return bool(pos < len(idx) and idx[pos] == f)

    def payload(self, k: int, i: int, f: int) -> bytes | None:
        """Payload of packet ``f`` of file ``i`` if user ``k`` holds it."""
        table = self._lookup.get((k, i))
        if table is None:
            table = {int(f_): n for n, f_ in enumerate(self.indices[k][i])}
            self._lookup[(k, i)] = table
        n = table.get(f)
        return None if n is None else self.payloads[k][i][n].tobytes()

    def stored_packets(self, k: int) -> int:
        return sum(len(a) for a in self.indices[k])


def place_decentralized(
    library: Library, params: SystemParams, rng: np.random.Generator
) -> CacheTable:
    quota = params.quota
    indices, payloads = [], []
    for _k in range(params.K):
        idx_k, pay_k = [], []
        for i in range(params.N):
            if quota == params.F:
                idx = np.arange(params.F)
            else:
                idx = np.sort(rng.choice(params.F, size=quota, replace=False))
            idx_k.append(idx)
            pay_k.append(library.data[i, idx].copy())
        indices.append(idx_k)
        payloads.append(pay_k)
    return CacheTable(params.K, params.N, params.F, indices, payloads)


@dataclass
class SubfileMap:
    """For each file, the packet indices cached by exactly each user subset."""

    K: int
    F: int
    entries: list[dict[int, np.ndarray]]

    def entry(self, i: int, mask: int) -> np.ndarray:
        got = self.entries[i].get(mask)
        return got if got is not None else np.empty(0, dtype=np.int64)

    def size(self, i: int, mask: int) -> int:
        return len(self.entry(i, mask))

    def fraction(self, i: int, mask: int) -> float:
        return self.size(i, mask) / self.F


def subfile_partition(cache: CacheTable, params: SystemParams) -> SubfileMap:
    entries = []
    for i in range(params.N):
        masks = np.zeros(params.F, dtype=np.int64)
        for k in range(params.K):
            masks[cache.indices[k][i]] |= 1 << k
        order = np.argsort(masks, kind="stable")
        sorted_masks = masks[order]
        keys, starts = np.unique(sorted_masks, return_index=True)
        bounds = list(starts[1:]) + [params.F]
        entries.append(
            {int(m): order[s:e] for m, s, e in zip(keys, starts, bounds)}
        )
    return SubfileMap(params.K, params.F, entries)


def uncached_fraction(sfm: SubfileMap, i: int, users: int) -> float:
    """Fraction of file ``i`` held by none of the users in bitmask ``users``.

    Converges to (1-p)^|users| under decentralized placement.
    """
    missing = sum(len(v) for m, v in sfm.entries[i].items() if not m & users)
    return missing / sfm.F


def write_subfile_csv(sfm: SubfileMap, out: IO[str]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["file_id", "subset_bitmask", "count"])
    for i, ent in enumerate(sfm.entries):
        for mask in sorted(ent):
            w.writerow([i, mask, len(ent[mask])])
