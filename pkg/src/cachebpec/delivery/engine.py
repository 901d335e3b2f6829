"""Feedback-driven multi-phase delivery over the erasure channel.

Work is tracked as tokens: one pending packet wanted by one user, whose
content every other user of its subphase pool can cancel.  Cache placement
seeds the pools directly (a packet of user k's file cached by exactly the
users in S becomes a token of pool S | {k}); what nobody caches is sent
uncoded in phase 1.  Pools are then served in order of cardinality.

Within a pool every slot combines the head token of each nonempty user queue
with fresh nonzero coefficients.  After the state comes back, a head is
consumed when its user received the slot, or upgraded to the pool enlarged
by the outside receivers; otherwise it stays at the head.

Token values are ints: ``v >= 0`` is base packet ``v % stride`` of file
``v // stride``; ``v < 0`` is the combination transmitted in slot ``-v - 1``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from ..gf_codec import combine
from ..rng import CoefficientSource

CREDITED = 1
UPGRADED = 2


def popcount(x: int) -> int:
    return bin(x).count("1")


def canonical_order(K: int) -> list[int]:
    """Subphase masks by cardinality, then by bitmask value."""
    return sorted(range(1, 1 << K), key=lambda m: (popcount(m), m))


def users_of(mask: int) -> list[int]:
    return [k for k in range(mask.bit_length()) if mask >> k & 1]


@dataclass(slots=True)
class Token:
    tid: int
    user: int
    known: int
    value: int
    payload: bytes | None


@dataclass
class Transcript:
    """Everything the transmitter did, slot by slot, plus token bookkeeping.

    Nothing here depends on payload contents except ``payloads`` itself, so
    receivers can replay the symbolic part from the states and the shared
    coefficient stream.
    """

    K: int
    stride: int
    # per slot
    pool: list[int] = field(default_factory=list)
    state: list[int] = field(default_factory=list)
    terms: list[tuple] = field(default_factory=list)  # ((value, coeff), ...)
    heads: list[tuple] = field(default_factory=list)  # ((user, tid), ...)
    payloads: list[bytes | None] = field(default_factory=list)
    # per token
    tok_user: list[int] = field(default_factory=list)
    tok_known: list[int] = field(default_factory=list)
    tok_value: list[int] = field(default_factory=list)
    tok_pool: list[int] = field(default_factory=list)
    tok_parent: list[int] = field(default_factory=list)
    tok_fate: list[int] = field(default_factory=list)
    tok_fate_slot: list[int] = field(default_factory=list)
    tok_child: list[int] = field(default_factory=list)
    subphase_lengths: dict[int, int] = field(default_factory=dict)

    @property
    def slots(self) -> int:
        return len(self.state)

    def new_token(self, user, known, value, pool, parent=-1) -> int:
        tid = len(self.tok_user)
        self.tok_user.append(user)
        self.tok_known.append(known)
        self.tok_value.append(value)
        self.tok_pool.append(pool)
        self.tok_parent.append(parent)
        self.tok_fate.append(0)
        self.tok_fate_slot.append(-1)
        self.tok_child.append(-1)
        return tid

    def order_lengths(self) -> dict[int, list[int]]:
        """Measured subphase lengths grouped by subphase cardinality."""
        out: dict[int, list[int]] = {}
        for mask, n in self.subphase_lengths.items():
            out.setdefault(popcount(mask), []).append(n)
        return out

    def export_lines(self):
        """Yield ``slot_index,subphase_bitmask,state_bitmask`` lines."""
        yield "slot_index,subphase_bitmask,state_bitmask"
        for i, (m, s) in enumerate(zip(self.pool, self.state)):
            yield f"{i},{m},{s}"


class ConservationError(AssertionError):
    pass


def check_conservation(tr: Transcript) -> dict[str, int]:
    """Audit token accounting; raises ``ConservationError`` on any violation.

    Every token must be resolved exactly once, credited tokens must have been
    received by their user in the resolving slot, and upgrades must land in a
    strictly larger pool with the same user and a child that points back.
    """
    credited = upgraded = 0
    for tid, fate in enumerate(tr.tok_fate):
        user = tr.tok_user[tid]
        if tr.tok_known[tid] >> user & 1:
            raise ConservationError(f"token {tid} is known by its own user")
        slot = tr.tok_fate_slot[tid]
        if fate == CREDITED:
            credited += 1
            if not tr.state[slot] >> user & 1:
                raise ConservationError(f"token {tid} credited without reception")
        elif fate == UPGRADED:
            upgraded += 1
            child = tr.tok_child[tid]
            src, dst = tr.tok_pool[tid], tr.tok_pool[child]
            if tr.tok_parent[child] != tid or tr.tok_user[child] != user:
                raise ConservationError(f"token {tid} has an inconsistent child")
            if dst & src != src or dst == src:
                raise ConservationError(f"token {tid} upgraded to a non-superset pool")
        else:
            raise ConservationError(f"token {tid} was never resolved")
        if fate and (user, tid) not in tr.heads[slot]:
            raise ConservationError(f"token {tid} resolved in a slot it was not part of")
    children = sum(1 for p in tr.tok_parent if p >= 0)
    if children != upgraded:
        raise ConservationError("upgrade count does not match derived tokens")
    return {"tokens": len(tr.tok_fate), "credited": credited, "upgraded": upgraded}


class Engine:
    """Holds the subphase pools and drives them through the channel."""

    def __init__(self, K: int, channel, coding_rng, stride: int, track_payloads: bool = True):
        self.K = K
        self.channel = channel
        self.coeff = CoefficientSource(coding_rng)
        self.track = track_payloads
        self.transcript = Transcript(K, stride)
        self.pools: dict[int, dict[int, deque]] = {}

    def add_token(self, user: int, known: int, value: int, payload, pool: int | None = None,
                  parent: int = -1) -> Token:
        if pool is None:
            pool = known | (1 << user)
        tid = self.transcript.new_token(user, known, value, pool, parent)
        tok = Token(tid, user, known, value, payload if self.track else None)
        self.pools.setdefault(pool, {}).setdefault(user, deque()).append(tok)
        return tok

    def queue_sizes(self, mask: int) -> dict[int, int]:
        return {k: len(q) for k, q in self.pools.get(mask, {}).items()}

    def run_subphase(self, mask: int) -> int:
        """Serve pool ``mask`` until all its queues are empty; returns its length."""
        pool = self.pools.get(mask)
        if not pool:
            return 0
        tr = self.transcript
        send = self.channel.send
        coeff = self.coeff
        track = self.track
        queues = sorted(pool.items())
        start = tr.slots
        while True:
            heads = [(k, q, q[0]) for k, q in queues if q]
            if not heads:
                break
            slot = len(tr.state)
            distinct: dict[int, bytes | None] = {}
            for _, _, tok in heads:
                if tok.value not in distinct:
                    distinct[tok.value] = tok.payload
            if len(distinct) == 1:
                new_value, payload = next(iter(distinct.items()))
                terms = ((new_value, 1),)
            else:
                cs = [coeff() for _ in distinct]
                terms = tuple(zip(distinct, cs))
                payload = combine(list(distinct.values()), cs) if track else None
                new_value = -slot - 1
            state = send(payload)
            tr.pool.append(mask)
            tr.state.append(state)
            tr.terms.append(terms)
            tr.heads.append(tuple((k, tok.tid) for k, _, tok in heads))
            tr.payloads.append(payload)
            outside = state & ~mask
            for k, q, tok in heads:
                if state >> k & 1:
                    q.popleft()
                    tr.tok_fate[tok.tid] = CREDITED
                    tr.tok_fate_slot[tok.tid] = slot
                elif outside:
                    q.popleft()
                    child = self.add_token(
                        k, (mask & ~(1 << k)) | outside, new_value, payload,
                        mask | outside, parent=tok.tid,
                    )
                    tr.tok_fate[tok.tid] = UPGRADED
                    tr.tok_fate_slot[tok.tid] = slot
                    tr.tok_child[tok.tid] = child.tid
        n = tr.slots - start
        tr.subphase_lengths[mask] = n
        return n

    def run_phase1(self) -> int:
        return sum(self.run_subphase(1 << k) for k in range(self.K))

    def run(self) -> Transcript:
        """Serve every pool in canonical order; each phase sees final pools."""
        for mask in canonical_order(self.K):
            if mask in self.pools:
                self.run_subphase(mask)
        return self.transcript
