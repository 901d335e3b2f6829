"""Feedback-free coded multicast baseline.

Every nonempty user subset S gets one multicast message: unit n of it is the
sum over k in S of packet n of ``entry(d_k, S - {k})`` (missing packets count
as zero).  User k already knows every unit beyond its own subfile size, so it
decodes once it holds that many independent combinations.  The message is
streamed as random linear combinations and a genie stops the stream once all
of S can decode; the encoder itself never looks at the states.

With q = 256 a random combination is independent of the ones a user already
holds with probability close to one, so the run is counted rather than coded:
user k needs ``|entry(d_k, S - {k})|`` receptions.
"""

from __future__ import annotations

from .. import analytics
from ..placement import CacheTable, Library, SubfileMap, SystemParams, subfile_partition
from .engine import Transcript, canonical_order, users_of
from .scheme import SimReport, validate_demands


def message_demands(sfm: SubfileMap, demands, mask: int) -> dict[int, int]:
    """Receptions each member of ``mask`` needs from the message of ``mask``."""
    return {k: sfm.size(demands[k], mask & ~(1 << k)) for k in users_of(mask)}


def run_delivery_nofb(
    library: Library | None,
    cache: CacheTable,
    demands,
    params: SystemParams,
    channel,
    sfm: SubfileMap | None = None,
) -> tuple[Transcript, SimReport]:
    validate_demands(demands, params)
    if sfm is None:
        sfm = subfile_partition(cache, params)
    K = params.K
    tr = Transcript(K, params.F)
    send = channel.send
    for mask in canonical_order(K):
        need = {k: n for k, n in message_demands(sfm, demands, mask).items() if n}
        if not need:
            continue
        start = tr.slots
        while need:
            state = send(None)
            tr.pool.append(mask)
            tr.state.append(state)
            tr.terms.append(())
            tr.heads.append(())
            tr.payloads.append(None)
            for k in [k for k in need if state >> k & 1]:
                need[k] -= 1
                if not need[k]:
                    del need[k]
        tr.subphase_lengths[mask] = tr.slots - start

    p = params.p_eff
    F, delta = params.F, params.delta
    report = SimReport(
        T_hat=tr.slots,
        subphase_lengths=dict(tr.subphase_lengths),
        T_pred=F * analytics.t_tot_nofb(K, p, delta),
        t_pred={
            j: F * p ** (j - 1) * (1 - p) ** (K - j + 1) / (1 - delta)
            for j in range(1, K + 1)
        },
        p_eff=p,
    )
    return tr, report

