"""Closed-form rates, completion times and phase-length recursions.

Conventions
-----------
``p`` is the cached fraction M/N, ``delta`` the per-user erasure probability.
Completion times are per packet of file size (multiply by F).  Order rates
are *sum* rates over all C(K, i) subsets; divide by ``comb(K, i)`` for the
per-subset value.  Degenerate endpoints return ``math.inf`` / 0 instead of
raising so that sweep grids may include them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from math import comb

import numpy as np


def _weights(K: int, p: float, delta: float) -> list[float]:
    return [(1 - p) ** k / (1 - delta**k) for k in range(1, K + 1)]


def t_tot(K: int, p: float, delta: float) -> float:
    """Slots per file packet needed to serve K distinct demands with feedback."""
    return math.fsum(_weights(K, p, delta))


def t_tot_nofb(K: int, p: float, delta: float) -> float:
    """Same without feedback: the perfect-link load stretched by 1/(1-delta)."""
    return math.fsum((1 - p) ** k for k in range(1, K + 1)) / (1 - delta)


def t_tot_perfect_link(K: int, p: float) -> float:
    """Product form of the erasure-free load, (1-p)/p * (1-(1-p)^K)."""
    if p == 0:
        return float(K)
    return (1 - p) / p * (1 - (1 - p) ** K)


def symmetric_rate(K: int, p: float, delta: float) -> float:
    t = t_tot(K, p, delta)
    return math.inf if t == 0 else 1.0 / t


@dataclass(frozen=True)
class RegionVerdict:
    achievable: bool
    permutation: tuple[int, ...]  # user placed at weight position 1, 2, ...
    lhs: float

    @property
    def slack(self) -> float:
        return 1.0 - self.lhs


def is_achievable(
    rates, K: int, p: float, delta: float, tol: float = 1e-12
) -> RegionVerdict:
    """Check a rate tuple against every weighted-sum constraint of the region.

    The weights decrease with position, so the binding permutation pairs the
    largest rate with the largest weight.  For K <= 6 all K! permutations are
    enumerated as a cross-check.
    """
    rates = [float(r) for r in rates]
    if len(rates) != K:
        raise ValueError(f"expected {K} rates, got {len(rates)}")
    if any(r < 0 for r in rates):
        raise ValueError("rates must be nonnegative")
    w = _weights(K, p, delta)
    perm = tuple(sorted(range(K), key=lambda k: (-rates[k], k)))
    lhs = math.fsum(w[n] * rates[perm[n]] for n in range(K))
    if K <= 6:
        worst = max(
            math.fsum(w[n] * rates[q[n]] for n in range(K))
            for q in itertools.permutations(range(K))
        )
        assert worst <= lhs * (1 + 1e-12) + 1e-15, "sorted pairing is not the maximizer"
    return RegionVerdict(lhs <= 1.0 + tol, perm, lhs)


def vertex_point(K: int, users, p: float, delta: float) -> list[float]:
    """Corner of the region where only ``users`` are active."""
    users = set(users)
    r = symmetric_rate(len(users), p, delta) if users else 0.0
    return [r if k in users else 0.0 for k in range(K)]


def alpha(K: int, delta: float, i: int, j: int) -> float:
    """Probability that an order-i token becomes order-j for its user."""
    if not 1 <= i < j <= K:
        raise ValueError(f"need 1 <= i < j <= K, got i={i}, j={j}, K={K}")
    return delta ** (K - j + 1) * (1 - delta) ** (j - i)


def beta(K: int, delta: float, j: int) -> float:
    """Per-slot probability that an order-j token is consumed."""
    if not 1 <= j <= K:
        raise ValueError(f"need 1 <= j <= K, got j={j}, K={K}")
    return 1 - delta ** (K - j + 1)


def transition_params(K: int, delta: float, i: int, j: int) -> tuple[float, float]:
    return alpha(K, delta, i, j), beta(K, delta, j)


@dataclass
class PhasePlan:
    """Asymptotic per-subphase lengths and token flows.

    ``t[j]`` is the length of one order-j subphase, ``N[i, j]`` the number of
    order-j tokens one user obtains from one order-i subphase, and ``N0[j]``
    the per-user, per-subset load seeded by the caches (``N0[1]`` is the
    uncached remainder sent in phase 1).
    """

    K: int
    t: np.ndarray  # index 1..K
    N: np.ndarray  # (K+1, K+1)
    N0: np.ndarray  # index 1..K

    @property
    def phase_lengths(self) -> np.ndarray:
        return np.array([0.0] + [comb(self.K, j) * self.t[j] for j in range(1, self.K + 1)])

    @property
    def total(self) -> float:
        return float(self.phase_lengths.sum())


def phase_plan(K: int, delta: float, p: float, F: float = 1.0) -> PhasePlan:
    t = np.zeros(K + 1)
    N = np.zeros((K + 1, K + 1))
    N0 = np.zeros(K + 1)
    N0[1] = F * (1 - p) ** K
    for j in range(2, K + 1):
        N0[j] = F * p ** (j - 1) * (1 - p) ** (K - j + 1)
    for j in range(1, K + 1):
        load = N0[j] + sum(comb(j - 1, i - 1) * N[i, j] for i in range(1, j))
        t[j] = load / beta(K, delta, j)
        for jj in range(j + 1, K + 1):
            N[j, jj] = t[j] * alpha(K, delta, j, jj)
    return PhasePlan(K, t, N, N0)


def order_rate_bound(K: int, i: int, delta: float) -> float:
    """Largest achievable sum rate of order-i messages."""
    if not 1 <= i <= K:
        raise ValueError(f"need 1 <= i <= K, got i={i}")
    den = math.fsum(comb(K - k, i - 1) / (1 - delta**k) for k in range(1, K - i + 2))
    return comb(K, i) / den


def order_rate_per_subset(K: int, i: int, delta: float) -> float:
    """``order_rate_bound`` shared evenly over the C(K, i) subsets."""
    return order_rate_bound(K, i, delta) / comb(K, i)


@dataclass
class OrderRestart:
    t: dict[int, float]  # subphase length per order j >= i
    rate: float
    U_recursive: dict[int, float]
    U_closed: dict[int, float]


def restart_at_order(K: int, delta: float, i: int, Ni: float) -> OrderRestart:
    """Run the phase recursion starting at phase ``i`` with ``Ni`` tokens per
    user and subset.

    Besides the subphase lengths and resulting sum rate, the regrouped phase
    totals U_j are returned both from their alternating recursion and from
    their closed form ``Ni / beta_j * C(j-1, j-i)``.
    """
    if not 1 <= i <= K:
        raise ValueError(f"need 1 <= i <= K, got i={i}")
    t = {i: Ni / beta(K, delta, i)}
    for j in range(i + 1, K + 1):
        t[j] = math.fsum(
            comb(j - 1, l - 1) * t[l] * alpha(K, delta, l, j) for l in range(i, j)
        ) / beta(K, delta, j)
    total = math.fsum(comb(K, j) * t[j] for j in t)
    rate = comb(K, i) * Ni / total if total else math.inf

    U = {i: t[i]}
    for j in range(i + 1, K + 1):
        U[j] = math.fsum(
            comb(j - 1, l) * (-1) ** (l + 1) * beta(K, delta, j - l) * U[j - l]
            for l in range(1, j - i + 1)
        ) / beta(K, delta, j)
    closed = {j: Ni / beta(K, delta, j) * comb(j - 1, j - i) for j in t}
    return OrderRestart(t, rate, U, closed)


def nocache_rate_from_orders(K: int, delta: float) -> float:
    """Order-1 rate rebuilt from the higher order rates (no caches)."""
    return cache_rate(K, 0.0, delta)


def cache_rate(K: int, p: float, delta: float) -> float:
    """Order-1 sum rate of the cache-aided scheme from the higher order rates.

    The numerator counts whole files (K*F with F = 1): cached packets are
    delivered too.  At p = 0 this is the no-cache expression.
    """
    if p >= 1:
        return math.inf
    N0 = (1 - p) ** K
    t1 = N0 / beta(K, delta, 1)
    den = K * t1
    for j in range(2, K + 1):
        load = p ** (j - 1) * (1 - p) ** (K - j + 1) + t1 * alpha(K, delta, 1, j)
        den += comb(K, j) * load / order_rate_bound(K, j, delta)
    return K / den


def restart_decomposition_residual(K: int, delta: float, N1: float = 1.0) -> float:
    """max_j |t_j(N1) - sum_{i=2..j} t^i_j(N_{1->i})| for j = 2..K.

    The left side is the plain phase recursion started with N1 private
    tokens; the right side decomposes it into restarts at every phase i fed
    by what phase 1 upgraded to order i.
    """
    plan = phase_plan(K, delta, 0.0, F=N1 / 1.0)
    t1 = plan.t[1]
    starts = {i: restart_at_order(K, delta, i, t1 * alpha(K, delta, 1, i)) for i in range(2, K + 1)}
    worst = 0.0
    for j in range(2, K + 1):
        rhs = math.fsum(starts[i].t[j] for i in range(2, j + 1))
        worst = max(worst, abs(plan.t[j] - rhs))
    return worst
