"""Reusable constraint patterns built on the Plonkish builder.

Every gadget works in bulk: it takes a :class:`Cells` bundle of N inputs and
lays out N copies of its per-op cell block, ``k`` blocks side by side per row
(row packing), all sharing one selector.  Single-cell calls are a special
case and return a bare :class:`CellRef`.

Gadget configuration (selector, gate polynomials, lookups, tables) is cached
on the builder, so repeated calls with equal parameters reuse everything.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import BoundTooWide, EmptyInput, LengthMismatch, TooManyBytes, UnsupportedWidth
from .field import to_signed
from .plonkish.circuit import CellRef, Cells, CircuitBuilder, Column

PACK_BYTES = 31
DEFAULT_BUDGET = 32


# -- shared resources --------------------------------------------------------


def zero_cell(b: CircuitBuilder) -> CellRef:
    """A fixed cell holding 0, used for censoring, translation fill and padding."""

    def make():
        col = b.fixed_column()
        b.assign_fixed(col, 0, [0])
        return col.cell(0)

    return b.shared("zero-cell", make)


def zero_key(b: CircuitBuilder) -> int:
    return zero_cell(b).key


def table(b: CircuitBuilder, key, entries_fn) -> tuple[Column, ...]:
    """Fixed lookup table, built once per circuit per ``key``."""
    return b.shared(("table", key), lambda: b.add_table(np.asarray(entries_fn())))


def range_table(b: CircuitBuilder, bits: int) -> Column:
    if bits not in (8, 16):
        raise UnsupportedWidth(f"range tables exist for 8 and 16 bits, not {bits}")
    return table(b, ("range", bits), lambda: np.arange(1 << bits, dtype=np.int64))[0]


def remainder_table(b: CircuitBuilder, a: int) -> Column:
    return table(b, ("rem", a), lambda: np.arange(a, dtype=np.int64))[0]


def clamp_fn(x):
    return np.clip(x, 0, 255)


def clamp_table(b: CircuitBuilder, lo: int, hi: int) -> tuple[Column, Column]:
    if hi - lo + 1 > 1 << 16:
        raise BoundTooWide(f"clamp span [{lo}, {hi}] exceeds 2^16 entries")

    def entries():
        x = np.arange(lo, hi + 1, dtype=np.int64)
        return np.stack([x - lo, clamp_fn(x)], axis=1)

    return table(b, ("clamp", lo, hi), entries)


def map_table(b: CircuitBuilder, mapping: np.ndarray) -> tuple[Column, Column]:
    """Two-column table ``(p, mapping[p])`` for p in 0..255, deduplicated by content."""
    m = np.asarray(mapping, dtype=np.int64)
    return table(b, ("map", m.tobytes()), lambda: np.stack([np.arange(len(m)), m], axis=1))


# -- row packing ---------------------------------------------------------------


def replicas(width: int, budget: int | None) -> int:
    """Ops per row: as many ``width``-cell blocks as fit in ``budget`` columns."""
    budget = DEFAULT_BUDGET if budget is None else budget
    return max(1, budget // width)


def rows_needed(n_ops: int, width: int, budget: int | None) -> int:
    return math.ceil(n_ops / replicas(width, budget))


class OpBlock:
    """Rows holding ``n`` ops of ``width`` cells each, ``k`` ops per row.

    Op ``j`` lives on row ``start + j // k`` in pool columns
    ``(j % k) * width ... + width - 1``.  The op count is padded up to a
    multiple of ``k``; callers fill the padding with dummy zero-input ops.
    """

    def __init__(self, b: CircuitBuilder, n: int, width: int, k: int, category: str):
        self.b = b
        self.n = n
        self.width = width
        self.k = k
        self.nrows = math.ceil(n / k) if n else 0
        self.total = self.nrows * k
        self.cols = b.advice_pool(width * k)
        self.start = b.alloc_rows(self.nrows, category)

    def keys(self, c: int) -> np.ndarray:
        j = np.arange(self.total, dtype=np.int64)
        rows = self.start + j // self.k
        cols = np.array([self.cols[i * self.width + c].index for i in range(self.k)], dtype=np.int64)[j % self.k]
        return (cols << 32) | rows

    def cells(self, c: int, values=None) -> Cells:
        v = None if values is None else np.asarray(values)[: self.n]
        return Cells(self.keys(c)[: self.n], v)

    def assign(self, c: int, values) -> None:
        if not self.b.track_values or values is None or not self.total:
            return
        vals = np.asarray(values)
        grid = vals.reshape(self.nrows, self.k)
        for i in range(self.k):
            self.b.assign_advice(self.cols[i * self.width + c], self.start, grid[:, i])

    def copy_in(self, c: int, src_keys: np.ndarray) -> None:
        """Copy-constrain op cell ``c`` to ``src_keys``; padding ops copy the zero cell."""
        keys = self.keys(c)
        src = np.full(self.total, zero_key(self.b), dtype=np.int64)
        src[: self.n] = np.asarray(src_keys, dtype=np.int64).ravel()
        self.b.add_copies(src, keys)

    def enable(self, selector: Column) -> None:
        if self.nrows:
            self.b.enable_selector(selector, range(self.start, self.start + self.nrows))


def _config(b: CircuitBuilder, key, name: str, width: int, k: int, gate_fn=None, lookup_fn=None,
            category: str = "transform") -> Column:
    """Selector plus per-replica gate polys / lookups, shared by ``key``."""

    def make():
        cols = b.advice_pool(width * k)
        sel = b.selector_column()
        polys = []
        replicas_q = [[cols[i * width + c].cur for c in range(width)] for i in range(k)]
        if gate_fn is not None:
            for q in replicas_q:
                polys.extend(gate_fn(q))
            b.add_gate(name, polys, sel, category)
        if lookup_fn is not None:
            for q in replicas_q:
                for inputs, tab in lookup_fn(q):
                    b.add_lookup(list(inputs), list(tab), sel, name=name, category=category)
        return sel

    return b.shared(("cfg", key, width, k), make)


def _pad(values, total: int, fill=0) -> np.ndarray | None:
    if values is None:
        return None
    v = np.asarray(values).ravel()
    out = np.full(total, fill, dtype=v.dtype if v.dtype != object else object)
    out[: len(v)] = v
    return out


def _bulk(cells, b) -> tuple[Cells, bool]:
    single = isinstance(cells, CellRef)
    return Cells.of(cells, b), single


def _ret(cells: Cells, single: bool):
    return cells.cell(0) if single else cells


# -- gadgets -------------------------------------------------------------------


def range_check(b: CircuitBuilder, cells, bits: int) -> None:
    """Constrain every cell to ``[0, 2**bits)`` via the shared range table."""
    tab = range_table(b, bits)
    cs = Cells.of(cells, b).ravel()
    keys = cs.keys
    cols = keys >> 32
    for col in np.unique(cols):
        col = int(col)

        def make(col=col):
            sel = b.selector_column()
            b.add_lookup([b.columns[col].cur], [tab], sel, name=f"range{bits}", category="range")
            return sel

        sel = b.shared(("range-check", bits, col), make)
        b.enable_selector(sel, keys[cols == col] & 0xFFFFFFFF)


def div_const(b: CircuitBuilder, c, a: int, quotient_bits: int | None = 8, quotient_min: int = 0,
              category: str = "transform"):
    """``c = b·a + r`` with ``0 <= r < a`` and ``b - quotient_min`` in ``quotient_bits`` bits.

    ``quotient_bits=None`` skips the quotient range check; only valid when the
    quotient feeds a lookup (e.g. a clamp) that bounds it anyway.
    Returns ``(b, r)``.
    """
    if a < 1:
        raise ValueError("divisor must be positive")
    cs, single = _bulk(c, b)
    cs = cs.ravel()
    k = replicas(3, b.column_budget)
    rem = remainder_table(b, a)
    if quotient_bits is not None:
        rtab = range_table(b, quotient_bits)

    def gate(q):
        return [q[0] - q[1] * a - q[2]]

    def lookups(q):
        out = [((q[2],), (rem,))]
        if quotient_bits is not None:
            out.append(((q[1] - quotient_min,), (rtab,)))
        return out

    sel = _config(b, ("div", a, quotient_bits, quotient_min), f"div{a}", 3, k, gate, lookups, category)
    blk = OpBlock(b, cs.size, 3, k, category)
    blk.copy_in(0, cs.keys)
    blk.enable(sel)
    quot = rmd = None
    if cs.values is not None:
        cv = _pad(cs.values, blk.total)
        if cv.dtype == object:
            quot = np.array([int(x) // a for x in cv], dtype=object)
            rmd = np.array([int(x) % a for x in cv], dtype=object)
        else:
            quot, rmd = np.divmod(cv.astype(np.int64), a)
        blk.assign(0, cv)
        blk.assign(1, quot)
        blk.assign(2, rmd)
    return _ret(blk.cells(1, quot), single), _ret(blk.cells(2, rmd), single)


def dot_const(b: CircuitBuilder, inputs, coeffs: Sequence[int], offset: int = 0, category: str = "transform"):
    """``y = Σ coeffs[i]·inputs[i] + offset`` with coefficients baked into the gate.

    ``inputs`` is a list of CellRefs (one op) or Cells of shape (N, n).
    """
    coeffs = [int(x) for x in coeffs]
    n = len(coeffs)
    if n < 1:
        raise LengthMismatch("dot_const needs at least one coefficient")
    single = not isinstance(inputs, Cells)
    if single:
        if len(inputs) != n:
            raise LengthMismatch(f"{len(inputs)} inputs for {n} coefficients")
        xs = Cells.of(list(inputs), b).reshape(1, n)
    else:
        xs = inputs
        if xs.keys.ndim != 2 or xs.keys.shape[1] != n:
            raise LengthMismatch(f"inputs of shape {xs.keys.shape} for {n} coefficients")
    width = n + 1
    k = replicas(width, b.column_budget)

    def gate(q):
        acc = q[n] - offset
        for i, cf in enumerate(coeffs):
            if cf:
                acc = acc - cf * q[i]
        return [acc]

    sel = _config(b, ("dot", tuple(coeffs), offset), "dot", width, k, gate, None, category)
    N = xs.keys.shape[0]
    blk = OpBlock(b, N, width, k, category)
    for i in range(n):
        blk.copy_in(i, xs.keys[:, i])
    blk.enable(sel)
    y = None
    if xs.values is not None:
        xv = np.zeros((blk.total, n), dtype=xs.values.dtype if xs.values.dtype == object else np.int64)
        xv[:N] = xs.values
        if xv.dtype == object:
            y = np.array([sum(cf * int(v) for cf, v in zip(coeffs, row)) + offset for row in xv], dtype=object)
        else:
            y = xv @ np.array(coeffs, dtype=np.int64) + offset
        for i in range(n):
            blk.assign(i, xv[:, i])
        blk.assign(n, y)
    return _ret(blk.cells(n, y), single)


def clamp(b: CircuitBuilder, cells, lo_bound: int, hi_bound: int, category: str = "transform"):
    """``y = min(max(x, 0), 255)`` through a shared ``(x - lo, y)`` table.

    The lookup also proves ``lo_bound <= x <= hi_bound``.
    """
    lo, hi = min(int(lo_bound), 0), max(int(hi_bound), 0)
    tab = clamp_table(b, lo, hi)
    cs, single = _bulk(cells, b)
    cs = cs.ravel()
    k = replicas(2, b.column_budget)

    def lookups(q):
        return [((q[0] - lo, q[1]), tab)]

    sel = _config(b, ("clamp", lo, hi), f"clamp[{lo},{hi}]", 2, k, None, lookups, category)
    blk = OpBlock(b, cs.size, 2, k, category)
    blk.copy_in(0, cs.keys)
    blk.enable(sel)
    y = None
    if cs.values is not None:
        xv = _pad(cs.values, blk.total)
        # canonical field values above p/2 stand for negatives
        xv = np.array([to_signed(int(v)) for v in xv], dtype=np.int64) if xv.dtype == object else xv.astype(np.int64)
        y = clamp_fn(xv)
        blk.assign(0, xv)
        blk.assign(1, y)
    return _ret(blk.cells(1, y), single)


def apply_map(b: CircuitBuilder, cells, mapping: np.ndarray, category: str = "transform"):
    """Per-sub-pixel map ``y = mapping[x]`` via a 256-entry two-column lookup."""
    m = np.asarray(mapping, dtype=np.int64)
    tab = map_table(b, m)
    cs, single = _bulk(cells, b)
    cs = cs.ravel()
    k = replicas(2, b.column_budget)

    def lookups(q):
        return [((q[0], q[1]), tab)]

    sel = _config(b, ("map", m.tobytes()), "map", 2, k, None, lookups, category)
    blk = OpBlock(b, cs.size, 2, k, category)
    blk.copy_in(0, cs.keys)
    blk.enable(sel)
    y = None
    if cs.values is not None:
        xv = _pad(cs.values, blk.total).astype(np.int64)
        y = m[xv]
        blk.assign(0, xv)
        blk.assign(1, y)
    return _ret(blk.cells(1, y), single)


def _pack_poly(q, m: int):
    acc = q[m]
    for i in range(m):
        acc = acc - (256**i) * q[i]
    return [acc]


def pack_bytes(b: CircuitBuilder, cells, category: str = "pack"):
    """``e = Σ cells[i]·256**i``; cells must already be byte range-checked.

    Accepts a list of up to 31 CellRefs (returns one CellRef) or Cells of
    shape (N, m) with m <= 31 (returns Cells of N elements).
    """
    single = not isinstance(cells, Cells)
    if single:
        cs = Cells.of(list(cells), b)
        if cs.size > PACK_BYTES:
            raise TooManyBytes(f"{cs.size} bytes do not fit one element (max {PACK_BYTES})")
        if cs.size == 0:
            raise EmptyInput("nothing to pack")
        cs = cs.reshape(1, -1)
    else:
        cs = cells
        if cs.keys.shape[1] > PACK_BYTES:
            raise TooManyBytes(f"{cs.keys.shape[1]} bytes do not fit one element (max {PACK_BYTES})")
    N, m = cs.keys.shape
    width = m + 1
    k = replicas(width, b.column_budget)
    sel = _config(b, ("pack", m), f"pack{m}", width, k, lambda q: _pack_poly(q, m), None, category)
    blk = OpBlock(b, N, width, k, category)
    for i in range(m):
        blk.copy_in(i, cs.keys[:, i])
    blk.enable(sel)
    e = None
    if cs.values is not None:
        xv = np.zeros((blk.total, m), dtype=np.uint8)
        xv[:N] = cs.values
        e = pack_rows(xv)
        for i in range(m):
            blk.assign(i, xv[:, i])
        blk.assign(m, e)
    return _ret(blk.cells(m, e), single)


def pack_rows(byte_rows: np.ndarray) -> np.ndarray:
    """Little-endian integer of each row of bytes, as an object array."""
    arr = np.ascontiguousarray(byte_rows, dtype=np.uint8)
    return np.array([int.from_bytes(r.tobytes(), "little") for r in arr], dtype=object)


def chunk_bytes(flat_cells: Cells, zero: int) -> Cells:
    """Reshape a flat run of byte cells into (ceil(n/31), 31), padding with the zero cell."""
    n = flat_cells.size
    rows = max(1, math.ceil(n / PACK_BYTES))
    keys = np.full(rows * PACK_BYTES, zero, dtype=np.int64)
    keys[:n] = flat_cells.keys.ravel()
    vals = None
    if flat_cells.values is not None:
        vals = np.zeros(rows * PACK_BYTES, dtype=np.uint8)
        vals[:n] = flat_cells.values.ravel()
        vals = vals.reshape(rows, PACK_BYTES)
    return Cells(keys.reshape(rows, PACK_BYTES), vals)


def pack_image_cells(b: CircuitBuilder, grid: Cells, category: str = "pack") -> Cells:
    """Pack a (H, W, 3) grid of byte cells into field-element cells (31 per element)."""
    return pack_bytes(b, chunk_bytes(grid.ravel(), zero_key(b)), category)


def pixel_entry(b: CircuitBuilder, data: np.ndarray | None, n_bytes: int | None = None,
                category: str = "pack") -> tuple[Cells, Cells]:
    """Witness a run of sub-pixels, 31 per row next to their packed element.

    Every byte is range-checked to 8 bits exactly here; the element column is
    tied to the bytes by the packing gate.  Returns ``(bytes, elements)``.
    """
    if data is not None:
        flat = np.ascontiguousarray(data, dtype=np.uint8).ravel()
        n_bytes = flat.size
    if not n_bytes:
        raise EmptyInput("image has no sub-pixels")
    n_el = math.ceil(n_bytes / PACK_BYTES)
    tab = range_table(b, 8)

    def lookups(q):
        return [((q[i],), (tab,)) for i in range(PACK_BYTES)]

    sel = _config(b, ("entry",), "entry", PACK_BYTES + 1, 1,
                  lambda q: _pack_poly(q, PACK_BYTES), lookups, category)
    blk = OpBlock(b, n_el, PACK_BYTES + 1, 1, category)
    blk.enable(sel)
    j = np.arange(n_el * PACK_BYTES, dtype=np.int64)
    cols = np.array([c.index for c in blk.cols[:PACK_BYTES]], dtype=np.int64)
    keys = (cols[j % PACK_BYTES] << 32) | (blk.start + j // PACK_BYTES)
    # padding bytes in the last row are pinned to zero
    if n_el * PACK_BYTES > n_bytes:
        pad = keys[n_bytes:]
        b.add_copies(np.full(len(pad), zero_key(b), dtype=np.int64), pad)
    bvals = evals = None
    if data is not None:
        padded = np.zeros(n_el * PACK_BYTES, dtype=np.uint8)
        padded[:n_bytes] = flat
        rows = padded.reshape(n_el, PACK_BYTES)
        evals = pack_rows(rows)
        for i in range(PACK_BYTES):
            blk.assign(i, rows[:, i])
        blk.assign(PACK_BYTES, evals)
        bvals = flat
    return Cells(keys[:n_bytes], bvals), blk.cells(PACK_BYTES, evals)
