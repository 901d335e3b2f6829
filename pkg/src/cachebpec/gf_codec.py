"""GF(2^8) arithmetic and packet-level linear coding.

Field elements are plain ints in ``[0, 255]``; the reduction polynomial is
x^8 + x^4 + x^3 + x + 1 (0x11B).  Packet payloads are ``bytes`` objects of a
common length P, and every payload operation is symbol-wise.

Scaling a payload by a constant is done with ``bytes.translate`` against a
precomputed 256-entry row of the multiplication table, and additions are
XORs on ``int`` views of the payload.  Both are far cheaper in CPython than
per-symbol loops or small numpy calls.
"""

from __future__ import annotations

from typing import Sequence

POLY = 0x11B
GENERATOR = 0x03  # 0x02 is not primitive modulo 0x11B

Payload = bytes


def _peasant_mul(a: int, b: int) -> int:
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a & 0x100:
            a ^= POLY
    return r


EXP = [0] * 510
LOG = [0] * 256
_x = 1
for _i in range(255):
    EXP[_i] = _x
    LOG[_x] = _i
    _x = _peasant_mul(_x, GENERATOR)
for _i in range(255, 510):
    EXP[_i] = EXP[_i - 255]
del _x, _i

# MUL[a] is a 256-byte translation table mapping b -> a*b.
MUL: list[bytes] = [bytes(256)] + [
    bytes([0] + [EXP[LOG[a] + LOG[b]] for b in range(1, 256)]) for a in range(1, 256)
]
INV = [0] + [EXP[255 - LOG[a]] for a in range(1, 256)]


def gf_add(a: int, b: int) -> int:
    return a ^ b


def gf_mul(a: int, b: int) -> int:
    return MUL[a][b]


def gf_inv(a: int) -> int:
    """Multiplicative inverse; raises ``ZeroDivisionError`` for 0."""
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(2^8)")
    return INV[a]


def gf_div(a: int, b: int) -> int:
    return MUL[a][gf_inv(b)]


def scale(payload: Payload, c: int) -> Payload:
    """Multiply every symbol of ``payload`` by the field constant ``c``."""
    return payload.translate(MUL[c])


def xor(a: Payload, b: Payload) -> Payload:
    n = len(a)
    return (int.from_bytes(a, "little") ^ int.from_bytes(b, "little")).to_bytes(n, "little")


def combine(payloads: Sequence[Payload], coeffs: Sequence[int]) -> Payload:
    """Symbol-wise linear combination ``sum(coeffs[i] * payloads[i])``."""
    if not payloads or len(payloads) != len(coeffs):
        raise ValueError("combine needs equally long, nonempty payload and coefficient lists")
    size = len(payloads[0])
    acc = 0
    for p, c in zip(payloads, coeffs):
        if len(p) != size:
            raise ValueError("payload length mismatch")
        if c == 1:
            acc ^= int.from_bytes(p, "little")
        elif c:
            acc ^= int.from_bytes(p.translate(MUL[c]), "little")
    return acc.to_bytes(size, "little")


def _row_axpy(dst: list[int], src: list[int], c: int) -> None:
    row = MUL[c]
    for j, s in enumerate(src):
        if s:
            dst[j] ^= row[s]


def solve_linear_system(
    rows: Sequence[tuple[Sequence[int], Payload]],
) -> list[Payload] | None:
    """Solve ``A x = b`` over GF(2^8) by Gaussian elimination.

    Parameters
    ----------
    rows
        ``(coefficients, rhs)`` pairs; every coefficient vector has the same
        length U (the number of unknowns) and there are at least U rows.

    Returns
    -------
    list of payloads or None
        The unique solution, or ``None`` when the matrix has rank below U.
    """
    if not rows:
        return []
    n = len(rows[0][0])
    if any(len(r[0]) != n for r in rows):
        raise ValueError("coefficient vectors differ in length")
    if len(rows) < n:
        return None
    size = len(rows[0][1])
    mat = [list(c) for c, _ in rows]
    rhs = [int.from_bytes(b, "little") for _, b in rows]

    def scale_int(v: int, c: int) -> int:
        return int.from_bytes(v.to_bytes(size, "little").translate(MUL[c]), "little")

    for col in range(n):
        pivot = next((r for r in range(col, len(mat)) if mat[r][col]), None)
        if pivot is None:
            return None
        mat[col], mat[pivot] = mat[pivot], mat[col]
        rhs[col], rhs[pivot] = rhs[pivot], rhs[col]
        inv = INV[mat[col][col]]
        if inv != 1:
            mat[col] = [MUL[inv][v] for v in mat[col]]
            rhs[col] = scale_int(rhs[col], inv)
        prow, prhs = mat[col], rhs[col]
        for r in range(len(mat)):
            c = mat[r][col]
            if r != col and c:
                _row_axpy(mat[r], prow, c)
                rhs[r] ^= scale_int(prhs, c)
    return [rhs[i].to_bytes(size, "little") for i in range(n)]
