"""Poseidon permutation (t=3, x^5, 8 full + 57 partial rounds) and sponge hash.

Round constants and the Cauchy MDS matrix are generated from the Grain LFSR
exactly as the reference parameter script does, then cached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import EmptyInput
from .field import P, to_signed
from .gadgets import PACK_BYTES, pack_rows, zero_key
from .plonkish.circuit import CellRef, Cells, CircuitBuilder

T = 3
RATE = 2
ALPHA = 5
R_F = 8
R_P = 57
N_BITS = 254
ROUNDS = R_F + R_P
BLOCK_ROWS = ROUNDS + 1


class _Grain:
    """80-bit self-shrinking Grain LFSR used for parameter generation."""

    def __init__(self, field: int, sbox: int, n: int, t: int, r_f: int, r_p: int):
        bits = (
            f"{field:02b}{sbox:04b}{n:012b}{t:012b}{r_f:010b}{r_p:010b}" + "1" * 30
        )
        self.state = [int(c) for c in bits]
        assert len(self.state) == 80
        for _ in range(160):
            self._step()

    def _step(self) -> int:
        s = self.state
        bit = s[62] ^ s[51] ^ s[38] ^ s[23] ^ s[13] ^ s[0]
        s.pop(0)
        s.append(bit)
        return bit

    def bit(self) -> int:
        while True:
            keep = self._step()
            out = self._step()
            if keep:
                return out

    def integer(self, n: int) -> int:
        v = 0
        for _ in range(n):
            v = (v << 1) | self.bit()
        return v


@dataclass(frozen=True)
class PoseidonParams:
    t: int
    rate: int
    alpha: int
    r_f: int
    r_p: int
    round_constants: tuple[tuple[int, ...], ...]
    mds: tuple[tuple[int, ...], ...]

    @property
    def rounds(self) -> int:
        return self.r_f + self.r_p

    def is_full(self, r: int) -> bool:
        half = self.r_f // 2
        return r < half or r >= half + self.r_p


@lru_cache(maxsize=None)
def params() -> PoseidonParams:
    g = _Grain(1, 0, N_BITS, T, R_F, R_P)
    rc = []
    for _ in range(ROUNDS * T):
        v = g.integer(N_BITS)
        while v >= P:
            v = g.integer(N_BITS)
        rc.append(v)
    while True:
        vals = [g.integer(N_BITS) % P for _ in range(2 * T)]
        if len(set(vals)) != len(vals):
            continue
        xs, ys = vals[:T], vals[T:]
        if any((x + y) % P == 0 for x in xs for y in ys):
            continue
        mds = tuple(tuple(pow(x + y, -1, P) for y in ys) for x in xs)
        break
    rows = tuple(tuple(rc[r * T : (r + 1) * T]) for r in range(ROUNDS))
    return PoseidonParams(T, RATE, ALPHA, R_F, R_P, rows, mds)


def _round(state: list[int], r: int, pp: PoseidonParams) -> list[int]:
    rc = pp.round_constants[r]
    s = [(x + c) % P for x, c in zip(state, rc)]
    if pp.is_full(r):
        s = [pow(x, ALPHA, P) for x in s]
    else:
        s[0] = pow(s[0], ALPHA, P)
    m = pp.mds
    return [(m[i][0] * s[0] + m[i][1] * s[1] + m[i][2] * s[2]) % P for i in range(T)]


def permute_trace(state: Sequence[int]) -> list[list[int]]:
    """All ``ROUNDS + 1`` intermediate states, starting with the input."""
    pp = params()
    cur = [int(x) % P for x in state]
    out = [cur]
    for r in range(pp.rounds):
        cur = _round(cur, r, pp)
        out.append(cur)
    return out


def permute(state: Sequence[int]) -> list[int]:
    if len(state) != T:
        raise ValueError(f"state must have {T} lanes")
    pp = params()
    cur = [int(x) % P for x in state]
    for r in range(pp.rounds):
        cur = _round(cur, r, pp)
    return cur


def _absorb_blocks(inputs: Sequence[int]) -> list[tuple[int, int]]:
    xs = [int(x) % P for x in inputs]
    if len(xs) % 2:
        xs.append(0)
    return [(xs[i], xs[i + 1]) for i in range(0, len(xs), 2)]


def hash_elements(inputs: Sequence[int]) -> int:
    """Sponge digest: capacity lane tagged with the input count, rate 2, lane 0 out."""
    if len(inputs) == 0:
        raise EmptyInput("hash of an empty input list")
    state = [0, 0, len(inputs) % P]
    for x0, x1 in _absorb_blocks(inputs):
        state = permute([(state[0] + x0) % P, (state[1] + x1) % P, state[2]])
    return state[0]


def image_elements(data: np.ndarray) -> list[int]:
    """Row-major, RGB-interleaved sub-pixels packed 31 per element, little-endian."""
    flat = np.ascontiguousarray(data, dtype=np.uint8).ravel()
    n_el = max(1, math.ceil(flat.size / PACK_BYTES))
    padded = np.zeros(n_el * PACK_BYTES, dtype=np.uint8)
    padded[: flat.size] = flat
    return [int(v) for v in pack_rows(padded.reshape(n_el, PACK_BYTES))]


def hash_image(img) -> int:
    data = img.data if hasattr(img, "data") else img
    return hash_elements(image_elements(data))


def digest_hex(d: int) -> str:
    return f"{int(d) % P:064x}"


def hash_rows(n_inputs: int) -> int:
    """Rows used by :func:`hash_gadget` for ``n_inputs`` elements."""
    return math.ceil(n_inputs / 2) * BLOCK_ROWS


# -- circuit -----------------------------------------------------------------


def _hash_config(b: CircuitBuilder):
    def make():
        pp = params()
        cols = b.advice_pool(5)
        a = [c.cur for c in cols]
        nxt = [c.next for c in cols[:3]]
        round_sels = []
        for r in range(pp.rounds):
            rc = pp.round_constants[r]
            s = [a[j] + rc[j] for j in range(T)]
            if pp.is_full(r):
                s = [x**ALPHA for x in s]
            else:
                s[0] = s[0] ** ALPHA
            polys = []
            for k in range(T):
                acc = nxt[k]
                for j in range(T):
                    acc = acc - to_signed(pp.mds[k][j]) * s[j]
                polys.append(acc)
            sel = b.selector_column()
            b.add_gate(f"poseidon r{r}", polys, sel, "hash")
            round_sels.append(sel)
        absorb = b.selector_column()
        b.add_gate("sponge absorb", [nxt[0] - a[0] - a[3], nxt[1] - a[1] - a[4], nxt[2] - a[2]], absorb, "hash")
        return cols, round_sels, absorb

    return b.shared("poseidon", make)


def _init_selector(b: CircuitBuilder, n: int):
    def make():
        cols = b.advice_pool(5)
        a = [c.cur for c in cols]
        sel = b.selector_column()
        b.add_gate(f"sponge init len={n}", [a[0] - a[3], a[1] - a[4], a[2] - (n % P)], sel, "hash")
        return sel

    return b.shared(("poseidon-init", n), make)


def hash_gadget(b: CircuitBuilder, inputs) -> CellRef:
    """Constrain the sponge over ``inputs`` cells; returns the digest cell.

    Layout: one 66-row block per permutation in pool columns A0..A4.  Row r
    of a block holds the state entering round r (A0..A2); A3/A4 carry the
    absorbed pair, on row 0 of the first block and on the last row of the
    preceding block for later ones.
    """
    if isinstance(inputs, Cells):
        cs = inputs.ravel()
    else:
        cs = Cells.of(list(inputs), b)
    n = cs.size
    if n == 0:
        raise EmptyInput("hash of an empty input list")
    cols, round_sels, absorb = _hash_config(b)
    init = _init_selector(b, n)
    nb = math.ceil(n / 2)
    start = b.alloc_rows(nb * BLOCK_ROWS, "hash")
    block_starts = start + BLOCK_ROWS * np.arange(nb, dtype=np.int64)
    b.enable_selector(init, [start])
    for r, sel in enumerate(round_sels):
        b.enable_selector(sel, block_starts + r, (0, 1))
    if nb > 1:
        b.enable_selector(absorb, block_starts[:-1] + ROUNDS, (0, 1))

    # rows carrying each absorbed pair
    in_rows = np.concatenate([[start], block_starts[:-1] + ROUNDS]).astype(np.int64)
    src = np.full(2 * nb, zero_key(b), dtype=np.int64)
    src[:n] = cs.keys
    dst = np.empty(2 * nb, dtype=np.int64)
    dst[0::2] = (cols[3].index << 32) | in_rows
    dst[1::2] = (cols[4].index << 32) | in_rows
    b.add_copies(src, dst)

    if cs.values is not None and b.track_values:
        xs = [int(v) % P for v in cs.values]
        if len(xs) % 2:
            xs.append(0)
        height = nb * BLOCK_ROWS
        lanes = [np.zeros(height, dtype=object) for _ in range(3)]
        in0 = np.zeros(height, dtype=object)
        in1 = np.zeros(height, dtype=object)
        state = [0, 0, n % P]
        for i in range(nb):
            x0, x1 = xs[2 * i], xs[2 * i + 1]
            state = [(state[0] + x0) % P, (state[1] + x1) % P, state[2]]
            trace = permute_trace(state)
            base = i * BLOCK_ROWS
            for k in range(3):
                lanes[k][base : base + BLOCK_ROWS] = [s[k] for s in trace]
            row = in_rows[i] - start
            in0[row], in1[row] = x0, x1
            state = trace[-1]
        for k in range(3):
            b.assign_advice(cols[k], start, lanes[k])
        b.assign_advice(cols[3], start, in0)
        b.assign_advice(cols[4], start, in1)
    return CellRef(start + nb * BLOCK_ROWS - 1, cols[0].index)
