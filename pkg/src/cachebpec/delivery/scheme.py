"""Cache-aided delivery runs and their reports."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import analytics
from ..placement import CacheTable, Library, SubfileMap, SystemParams, subfile_partition
from .engine import Engine, Transcript, popcount, users_of


class UnsupportedDemandError(ValueError):
    """Demands outside the distinct-request, N >= K regime."""


def validate_demands(demands, params: SystemParams) -> None:
    if len(demands) != params.K:
        raise UnsupportedDemandError(f"need {params.K} demands, got {len(demands)}")
    if params.N < params.K:
        raise UnsupportedDemandError("delivery requires N >= K")
    if len(set(demands)) != len(demands):
        raise UnsupportedDemandError("demands must be pairwise distinct")
    if any(not 0 <= d < params.N for d in demands):
        raise UnsupportedDemandError("demand index out of range")


def seed_pools_from_cache(
    engine: Engine,
    sfm: SubfileMap,
    demands,
    params: SystemParams,
    library: Library | None = None,
) -> None:
    """Turn the placement into initial tokens.

    For user k and every nonempty S not containing k, each packet of
    ``entry(d_k, S)`` becomes a token of pool ``S | {k}`` known by S.  The
    packets nobody caches fill the phase-1 queue of pool ``{k}``.  Packets
    user k caches itself are never sent.
    """
    validate_demands(demands, params)
    F = params.F
    for k, d in enumerate(demands):
        bit = 1 << k
        for mask in sorted(sfm.entries[d]):
            if mask & bit:
                continue
            idx = sfm.entries[d][mask]
            pays = library.data[d, idx] if library is not None else None
            for n, f in enumerate(idx.tolist()):
                engine.add_token(
                    k, mask, d * F + f,
                    pays[n].tobytes() if pays is not None else None,
                    pool=mask | bit,
                )


def seed_order_pools(engine: Engine, K: int, order: int, per_user: int, rng=None,
                     payload_bytes: int = 0) -> None:
    """Seed every pool of cardinality ``order`` with ``per_user`` fresh tokens per
    member, each known by the rest of the pool (a restart of the scheme at
    phase ``order``).  Values use synthetic file ids, one per (pool, user).
    """
    stride = engine.transcript.stride
    fid = 0
    for mask in range(1, 1 << K):
        if popcount(mask) != order:
            continue
        for k in users_of(mask):
            for f in range(per_user):
                pay = None
                if payload_bytes and rng is not None:
                    pay = rng.integers(0, 256, payload_bytes, dtype=np.uint8).tobytes()
                engine.add_token(k, mask & ~(1 << k), fid * stride + f, pay, pool=mask)
            fid += 1


@dataclass
class SimReport:
    T_hat: int
    subphase_lengths: dict[int, int]
    T_pred: float
    t_pred: dict[int, float]
    p_eff: float
    decode_success: dict[int, bool] = field(default_factory=dict)

    @property
    def rel_error(self) -> float:
        if self.T_pred == 0:
            return 0.0 if self.T_hat == 0 else float("inf")
        return abs(self.T_hat - self.T_pred) / self.T_pred

    def subphase_rel_errors(self) -> dict[int, float]:
        out = {}
        for mask, n in self.subphase_lengths.items():
            pred = self.t_pred[popcount(mask)]
            if pred > 0:
                out[mask] = abs(n - pred) / pred
        return out


def make_report(tr: Transcript, params: SystemParams) -> SimReport:
    p = params.p_eff
    plan = analytics.phase_plan(params.K, params.delta, p, F=params.F)
    return SimReport(
        T_hat=tr.slots,
        subphase_lengths=dict(tr.subphase_lengths),
        T_pred=params.F * analytics.t_tot(params.K, p, params.delta),
        t_pred={j: float(plan.t[j]) for j in range(1, params.K + 1)},
        p_eff=p,
    )


def run_delivery(
    library: Library,
    cache: CacheTable,
    demands,
    params: SystemParams,
    channel,
    coding_rng,
    sfm: SubfileMap | None = None,
    track_payloads: bool = True,
) -> tuple[Transcript, SimReport]:
    """Full feedback delivery: phase 1, then phases 2..K, until all queues drain."""
    validate_demands(demands, params)
    if sfm is None:
        sfm = subfile_partition(cache, params)
    engine = Engine(params.K, channel, coding_rng, stride=params.F, track_payloads=track_payloads)
    seed_pools_from_cache(engine, sfm, demands, params, library if track_payloads else None)
    tr = engine.run()
    return tr, make_report(tr, params)
