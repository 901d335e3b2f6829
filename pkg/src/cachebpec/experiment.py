"""One Monte Carlo replica: library, placement, demands, delivery, decoding.

All randomness of replica r comes from the named substreams of
``(params.seed, r)``, so the feedback run and the baseline see the same
library, caches, demands and erasure sample path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .channel import ErasureChannel
from .delivery import (
    DecodeResult,
    SimReport,
    Transcript,
    check_conservation,
    decode_user,
    run_delivery,
    run_delivery_nofb,
)
from .placement import SystemParams, generate_library, place_decentralized, subfile_partition
from .rng import substream


@dataclass
class ReplicaResult:
    replica: int
    demands: list[int]
    fb: SimReport
    transcript: Transcript
    nofb: SimReport | None = None
    decodes: list[DecodeResult] = field(default_factory=list)
    bit_exact: list[bool] = field(default_factory=list)

    @property
    def decode_ok(self) -> int:
        return sum(1 for d, b in zip(self.decodes, self.bit_exact) if d.success and b)

    @property
    def decode_fail(self) -> int:
        return len(self.decodes) - self.decode_ok

    @property
    def wrong_payloads(self) -> int:
        """Decodes that claimed success but differ from the library."""
        return sum(1 for d, b in zip(self.decodes, self.bit_exact) if d.success and not b)


def draw_demands(params: SystemParams, replica: int = 0) -> list[int]:
    rng = substream(params.seed, "demands", replica)
    return [int(d) for d in rng.permutation(params.N)[: params.K]]


def run_replica(
    params: SystemParams,
    replica: int = 0,
    decode: bool = True,
    nofb: bool = False,
) -> ReplicaResult:
    seed = params.seed
    library = generate_library(params, substream(seed, "library", replica))
    cache = place_decentralized(library, params, substream(seed, "placement", replica))
    sfm = subfile_partition(cache, params)
    demands = draw_demands(params, replica)

    channel = ErasureChannel(params.K, params.delta, substream(seed, "channel", replica))
    tr, report = run_delivery(
        library, cache, demands, params, channel,
        substream(seed, "coding", replica), sfm=sfm, track_payloads=decode,
    )
    check_conservation(tr)
    res = ReplicaResult(replica, demands, report, tr)

    if decode:
        for k in range(params.K):
            d = decode_user(k, tr, cache, demands, params.P)
            exact = d.success and d.packets == library.file(demands[k])
            res.decodes.append(d)
            res.bit_exact.append(exact)
            report.decode_success[k] = exact

    if nofb:
        channel = ErasureChannel(params.K, params.delta, substream(seed, "channel", replica))
        _, res.nofb = run_delivery_nofb(library, cache, demands, params, channel, sfm=sfm)
    return res
