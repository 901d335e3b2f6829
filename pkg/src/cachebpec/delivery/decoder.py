"""Per-user decoding of a feedback delivery transcript.

User k rebuilds, slot by slot, which token values were mixed with which
coefficients (public: it follows from the states and the shared coefficient
stream) and turns each relevant slot into a linear equation over its own
unknowns:

* its uncached packets of the demanded file, and
* the contents of slots it missed while one of its tokens was upgraded; those
  are needed later to peel the upgraded token back to the original packet.

Values other users want are cancelled with what k holds: cached packets,
slots it received, or recursively the heads of a missed slot of its own pool.
Only payloads k actually received or cached are ever read.

The resulting sparse system is solved by peeling degree-one equations, with
sparse Gaussian elimination on whatever stays coupled.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from ..gf_codec import INV, MUL
from ..placement import CacheTable
from .engine import Transcript


class DecoderInvariantError(RuntimeError):
    """A value the scheme promised to be cancellable was not."""


@dataclass
class DecodeResult:
    user: int
    success: bool
    packets: list[bytes] | None
    unknowns: int
    equations: int
    unresolved: int

    @property
    def rank_deficiency(self) -> int:
        return self.unresolved


def _scale_int(x: int, c: int, size: int) -> int:
    if c == 1 or x == 0:
        return x
    return int.from_bytes(x.to_bytes(size, "little").translate(MUL[c]), "little")


def _addmul(acc: dict, vec: dict, c: int) -> None:
    row = MUL[c]
    for v, a in vec.items():
        r = acc.get(v, 0) ^ row[a]
        if r:
            acc[v] = r
        else:
            acc.pop(v, None)


def decode_user(
    k: int,
    tr: Transcript,
    cache: CacheTable,
    demands,
    payload_bytes: int,
) -> DecodeResult:
    d = demands[k]
    F = tr.stride
    size = payload_bytes
    cached_idx = cache.indices[k][d]
    cached_d = [False] * F
    for f in cached_idx.tolist():
        cached_d[f] = True
    unknown_count = F - len(cached_idx)
    bit = 1 << k

    known: dict[int, int] = {}
    slot_vars: set[int] = set()
    memo: dict[int, tuple[dict, int]] = {}
    equations: list[list] = []  # [coeff dict, rhs int]

    def cached_int(f: int, idx: int) -> int:
        pay = cache.payload(k, f, idx)
        if pay is None:
            raise DecoderInvariantError(f"user {k} cannot cancel packet {idx} of file {f}")
        return int.from_bytes(pay, "little")

    def express(v: int) -> tuple[dict, int]:
        if v >= 0:
            f, idx = divmod(v, F)
            if f == d:
                if cached_d[idx]:
                    return {}, cached_int(f, idx)
                return {v: 1}, 0
            got = known.get(v)
            if got is not None:
                return {}, got
            return {}, cached_int(f, idx)
        if v in slot_vars:
            return {v: 1}, 0
        got = known.get(v)
        if got is not None:
            return {}, got
        hit = memo.get(v)
        if hit is not None:
            return hit
        s = -v - 1
        if not tr.pool[s] >> k & 1:
            raise DecoderInvariantError(f"user {k} cannot reconstruct slot {s}")
        vec: dict = {}
        const = 0
        for u, c in tr.terms[s]:
            ev, ec = express(u)
            if ev:
                _addmul(vec, ev, c)
            const ^= _scale_int(ec, c, size)
        memo[v] = (vec, const)
        return vec, const

    def slot_expression(s: int) -> tuple[dict, int]:
        vec: dict = {}
        const = 0
        for u, c in tr.terms[s]:
            ev, ec = express(u)
            if ev:
                _addmul(vec, ev, c)
            const ^= _scale_int(ec, c, size)
        return vec, const

    pools, states, terms, heads, payloads = tr.pool, tr.state, tr.terms, tr.heads, tr.payloads
    for s in range(tr.slots):
        mask = pools[s]
        got_it = states[s] & bit
        if not mask & bit:
            if got_it:
                y = int.from_bytes(payloads[s], "little")
                t = terms[s]
                known[t[0][0] if len(t) == 1 else -s - 1] = y
            continue
        if got_it:
            y = int.from_bytes(payloads[s], "little")
            vec, const = slot_expression(s)
            if vec:
                equations.append([vec, y ^ const])
            t = terms[s]
            if len(t) > 1:
                known[-s - 1] = y
            elif not vec:
                known[t[0][0]] = y
        elif len(terms[s]) > 1 and states[s] & ~mask and any(u == k for u, _ in heads[s]):
            x = -s - 1
            vec, const = slot_expression(s)
            slot_vars.add(x)
            vec = dict(vec)
            vec[x] = 1
            equations.append([vec, const])

    solution = solve_sparse(equations, size)
    packets = []
    unresolved = 0
    for idx in range(F):
        if cached_d[idx]:
            packets.append(cache.payload(k, d, idx))
            continue
        val = solution.get(d * F + idx)
        if val is None:
            unresolved += 1
            packets.append(None)
        else:
            packets.append(val.to_bytes(size, "little"))
    ok = unresolved == 0
    return DecodeResult(k, ok, packets if ok else None, unknown_count, len(equations), unresolved)


def solve_sparse(equations: list[list], size: int) -> dict[int, int]:
    """Solve a sparse GF(2^8) system; returns every variable it determines.

    Equations are ``[coeff dict, rhs int]`` and are consumed in place.
    """
    occurs: dict[int, list[int]] = {}
    for e, (vec, _) in enumerate(equations):
        for v in vec:
            occurs.setdefault(v, []).append(e)
    solution: dict[int, int] = {}
    ready = [e for e, (vec, _) in enumerate(equations) if len(vec) == 1]

    def peel(ready: list[int]) -> None:
        while ready:
            e = ready.pop()
            vec, rhs = equations[e]
            if len(vec) != 1:
                continue
            (v, c), = vec.items()
            vec.clear()
            if v in solution:
                continue
            val = _scale_int(rhs, INV[c], size)
            solution[v] = val
            for e2 in occurs.pop(v, ()):
                eq = equations[e2]
                c2 = eq[0].pop(v, 0)
                if c2:
                    eq[1] ^= _scale_int(val, c2, size)
                    if len(eq[0]) == 1:
                        ready.append(e2)

    peel(ready)
    rest = [equations[e] for e, (vec, _) in enumerate(equations) if vec]
    if rest:
        for v, val in _eliminate(rest, size).items():
            solution.setdefault(v, val)
    return solution


def _eliminate(rows: list[list], size: int) -> dict[int, int]:
    """Sparse Gaussian elimination; returns the variables pinned to one value.

    Each stored pivot row is normalised on its largest variable and only
    mentions smaller ones, so a new row is reduced by always clearing its
    largest pivot variable first (fill-in stays local for time-ordered rows).
    A variable whose back-substitution touches a free variable is reported
    as undetermined.
    """
    piv: dict[int, tuple[dict, int]] = {}
    for vec, rhs in rows:
        vec = dict(vec)
        heap = [-v for v in vec if v in piv]
        heapq.heapify(heap)
        while heap:
            v = -heapq.heappop(heap)
            c = vec.get(v)
            if not c:
                continue
            pv, pr = piv[v]
            for u in pv:
                if u != v and u in piv and u not in vec:
                    heapq.heappush(heap, -u)
            _addmul(vec, pv, c)
            rhs ^= _scale_int(pr, c, size)
        if not vec:
            continue
        top = max(vec)
        inv = INV[vec[top]]
        if inv != 1:
            row = MUL[inv]
            vec = {u: row[a] for u, a in vec.items()}
            rhs = _scale_int(rhs, inv, size)
        piv[top] = (vec, rhs)

    out: dict[int, int] = {}
    for v in sorted(piv):
        vec, val = piv[v]
        for u, c in vec.items():
            if u == v:
                continue
            got = out.get(u)
            if got is None:
                break
            val ^= _scale_int(got, c, size)
        else:
            out[v] = val
    return out
