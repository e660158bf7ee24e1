"""Versioned binary encoding of CircuitLayout plus a text debug dump.

Layout (all integers little-endian)::

    b"ZKCL" | u16 version
    u32 len | meta JSON (columns, gates, lookups, instance slots, sizes)
    u32 n   | n expression nodes (DAG, children precede parents)
    u32 n   | fixed chunks: u32 col, u32 start, u32 len, u8 enc, payload
    u32 n   | selectors:    u32 col, u32 count, u32[count] rows
    u64 n   | copies:       i64[n] a-keys, i64[n] b-keys
"""

from __future__ import annotations

import io
import json
import struct

import numpy as np

from ..errors import LayoutFormatError
from ..field import BYTES, P, decode, encode
from .circuit import (
    CellRef,
    CircuitLayout,
    Column,
    ColumnKind,
    CopyConstraintSet,
    CustomGate,
    LookupArgument,
)
from .expr import Constant, Power, Product, Query, Sum, walk

MAGIC = b"ZKCL"
VERSION = 1

_CONST, _QUERY, _SUM, _PROD, _POW = range(5)
_ENC_I64, _ENC_FIELD = 0, 1


def _encode_nodes(roots) -> tuple[bytes, dict[int, int]]:
    nodes = walk(roots)
    ids = {id(n): i for i, n in enumerate(nodes)}
    out = io.BytesIO()
    out.write(struct.pack("<I", len(nodes)))
    for n in nodes:
        if isinstance(n, Constant):
            out.write(struct.pack("<B", _CONST) + encode(n.value))
        elif isinstance(n, Query):
            out.write(struct.pack("<BIi", _QUERY, n.column, n.rotation))
        elif isinstance(n, (Sum, Product)):
            kids = n.terms if isinstance(n, Sum) else n.factors
            out.write(struct.pack("<BI", _SUM if isinstance(n, Sum) else _PROD, len(kids)))
            out.write(struct.pack(f"<{len(kids)}I", *(ids[id(k)] for k in kids)))
        elif isinstance(n, Power):
            out.write(struct.pack("<BII", _POW, ids[id(n.base)], n.exponent))
        else:  # pragma: no cover
            raise TypeError(type(n))
    return out.getvalue(), ids


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int) -> memoryview:
        if self.pos + n > len(self.data):
            raise LayoutFormatError("truncated layout")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size))

    def array(self, dtype, count: int) -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * count), dtype=dt).copy()


def _decode_nodes(r: _Reader) -> list:
    (count,) = r.unpack("<I")
    nodes: list = []
    for i in range(count):
        (tag,) = r.unpack("<B")
        if tag == _CONST:
            try:
                nodes.append(Constant(decode(bytes(r.take(BYTES)))))
            except ValueError as e:
                raise LayoutFormatError(str(e)) from e
            continue
        if tag == _QUERY:
            col, rot = r.unpack("<Ii")
            nodes.append(Query(col, rot))
            continue
        if tag in (_SUM, _PROD):
            (k,) = r.unpack("<I")
            kids = r.unpack(f"<{k}I")
            if any(c >= i for c in kids):
                raise LayoutFormatError("expression node refers forward")
            ch = [nodes[c] for c in kids]
            node = Sum.__new__(Sum) if tag == _SUM else Product.__new__(Product)
            # bypass flattening so the stored DAG is restored verbatim
            if tag == _SUM:
                node.terms = tuple(ch)
            else:
                node.factors = tuple(ch)
            nodes.append(node)
            continue
        if tag == _POW:
            base, e = r.unpack("<II")
            if base >= i:
                raise LayoutFormatError("expression node refers forward")
            nodes.append(Power(nodes[base], e))
            continue
        raise LayoutFormatError(f"unknown expression tag {tag}")
    return nodes


def layout_to_bytes(layout: CircuitLayout) -> bytes:
    roots = [p for g in layout.gates for p in g.polys] + [e for lk in layout.lookups for e in lk.inputs]
    node_blob, ids = _encode_nodes(roots)
    meta = {
        "rows": layout.rows,
        "max_degree": layout.max_degree,
        "blinding_rows": layout.blinding_rows,
        "used_rows": layout.used_rows,
        "region_rows": dict(sorted(layout.region_rows.items())),
        "columns": [c.kind.value for c in layout.columns],
        "table_lengths": {str(k): v for k, v in sorted(layout.table_lengths.items())},
        "gates": [
            {"name": g.name, "category": g.category, "selector": g.selector.index,
             "polys": [ids[id(p)] for p in g.polys]}
            for g in layout.gates
        ],
        "lookups": [
            {"name": lk.name, "category": lk.category,
             "selector": None if lk.selector is None else lk.selector.index,
             "inputs": [ids[id(e)] for e in lk.inputs], "table": [c.index for c in lk.table]}
            for lk in layout.lookups
        ],
        "instance": [[c.row, c.column] for c in layout.instance_slots],
    }
    out = io.BytesIO()
    out.write(MAGIC + struct.pack("<H", VERSION))
    mj = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    out.write(struct.pack("<I", len(mj)) + mj)
    out.write(node_blob)

    chunks = [(col, start, arr) for col, lst in sorted(layout.fixed_chunks.items()) for start, arr in lst]
    out.write(struct.pack("<I", len(chunks)))
    for col, start, arr in chunks:
        if arr.dtype == object:
            out.write(struct.pack("<IIIB", col, start, len(arr), _ENC_FIELD))
            out.write(b"".join(encode(int(v)) for v in arr))
        else:
            out.write(struct.pack("<IIIB", col, start, len(arr), _ENC_I64))
            out.write(np.ascontiguousarray(arr, dtype="<i8").tobytes())

    sels = sorted(layout.selector_rows.items())
    out.write(struct.pack("<I", len(sels)))
    for col, rows in sels:
        out.write(struct.pack("<II", col, len(rows)))
        out.write(np.ascontiguousarray(rows, dtype="<u4").tobytes())

    out.write(struct.pack("<Q", len(layout.copies)))
    out.write(np.ascontiguousarray(layout.copies.a, dtype="<i8").tobytes())
    out.write(np.ascontiguousarray(layout.copies.b, dtype="<i8").tobytes())
    return out.getvalue()


def layout_from_bytes(data: bytes) -> CircuitLayout:
    r = _Reader(data)
    if bytes(r.take(4)) != MAGIC:
        raise LayoutFormatError("bad magic")
    (version,) = r.unpack("<H")
    if version != VERSION:
        raise LayoutFormatError(f"unsupported layout version {version}")
    (mlen,) = r.unpack("<I")
    try:
        meta = json.loads(bytes(r.take(mlen)))
        columns = tuple(Column(i, ColumnKind(k)) for i, k in enumerate(meta["columns"]))
    except (ValueError, KeyError) as e:
        raise LayoutFormatError(f"bad layout metadata: {e}") from e
    nodes = _decode_nodes(r)

    def col(i):
        if not 0 <= i < len(columns):
            raise LayoutFormatError(f"column {i} out of range")
        return columns[i]

    try:
        gates = tuple(
            CustomGate(g["name"], tuple(nodes[i] for i in g["polys"]), col(g["selector"]), g["category"])
            for g in meta["gates"]
        )
        lookups = tuple(
            LookupArgument(lk["name"], tuple(nodes[i] for i in lk["inputs"]),
                           tuple(col(c) for c in lk["table"]),
                           None if lk["selector"] is None else col(lk["selector"]), lk["category"])
            for lk in meta["lookups"]
        )
    except (IndexError, KeyError) as e:
        raise LayoutFormatError(f"bad gate/lookup table: {e}") from e

    fixed: dict[int, list] = {c.index: [] for c in columns if c.kind is ColumnKind.FIXED}
    (nchunks,) = r.unpack("<I")
    for _ in range(nchunks):
        c, start, n, enc = r.unpack("<IIIB")
        if enc == _ENC_I64:
            arr = r.array("<i8", n).astype(np.int64)
        elif enc == _ENC_FIELD:
            raw = bytes(r.take(BYTES * n))
            arr = np.array([decode(raw[i * BYTES : (i + 1) * BYTES]) for i in range(n)], dtype=object)
        else:
            raise LayoutFormatError(f"unknown chunk encoding {enc}")
        if c not in fixed:
            raise LayoutFormatError(f"fixed chunk for non-fixed column {c}")
        fixed[c].append((start, arr))

    selectors = {}
    (nsel,) = r.unpack("<I")
    for _ in range(nsel):
        c, n = r.unpack("<II")
        selectors[c] = r.array("<u4", n).astype(np.int64)

    (ncopy,) = r.unpack("<Q")
    a = r.array("<i8", ncopy).astype(np.int64)
    b = r.array("<i8", ncopy).astype(np.int64)
    if r.pos != len(r.data):
        raise LayoutFormatError("trailing bytes after layout")
    rows = int(meta["rows"])
    if rows < 1 or rows & (rows - 1):
        raise LayoutFormatError("row count is not a power of two")
    return CircuitLayout(
        rows=rows,
        columns=columns,
        gates=gates,
        lookups=lookups,
        copies=CopyConstraintSet(a, b),
        fixed_chunks={k: tuple(v) for k, v in fixed.items()},
        selector_rows=selectors,
        table_lengths={int(k): int(v) for k, v in meta["table_lengths"].items()},
        instance_slots=tuple(CellRef(int(rw), int(c)) for rw, c in meta["instance"]),
        max_degree=int(meta["max_degree"]),
        blinding_rows=int(meta["blinding_rows"]),
        used_rows=int(meta["used_rows"]),
        region_rows=dict(meta["region_rows"]),
    )


def layout_dump(layout: CircuitLayout, max_items: int = 20) -> str:
    """Human-readable summary; long lists are elided after ``max_items``."""
    s = layout.stats()
    lines = [
        f"rows {s['rows']} (used {s['used_rows']}, blinding {layout.blinding_rows}, max degree {layout.max_degree})",
        f"columns: {s['advice_columns']} advice, {len(layout.columns_of(ColumnKind.FIXED))} fixed, "
        f"{len(layout.columns_of(ColumnKind.SELECTOR))} selector, {s['instance_columns']} instance",
        f"regions: {s['region_rows']}",
        f"gates ({len(layout.gates)}):",
    ]
    for i, g in enumerate(layout.gates[:max_items]):
        enabled = len(layout.selector_rows.get(g.selector.index, ()))
        for k, p in enumerate(g.polys):
            text = repr(p)
            if len(text) > 160:
                text = text[:157] + "..."
            lines.append(f"  [{i}.{k}] {g.name} <{g.category}> sel=c{g.selector.index} rows={enabled}: {text} = 0")
    if len(layout.gates) > max_items:
        lines.append(f"  ... {len(layout.gates) - max_items} more")
    lines.append(f"lookups ({len(layout.lookups)}):")
    for i, lk in enumerate(layout.lookups[:max_items]):
        tl = layout.table_lengths.get(lk.table[0].index, layout.rows)
        sel = "all" if lk.selector is None else f"c{lk.selector.index}"
        lines.append(f"  [{i}] {lk.name} sel={sel}: {list(lk.inputs)} in table{[c.index for c in lk.table]} ({tl} rows)")
    if len(layout.lookups) > max_items:
        lines.append(f"  ... {len(layout.lookups) - max_items} more")
    lines.append(f"copies: {len(layout.copies)} edges")
    lines.append(f"instance: {[(c.row, c.column) for c in layout.instance_slots]}")
    return "\n".join(lines) + "\n"


__all__ = ["layout_to_bytes", "layout_from_bytes", "layout_dump", "MAGIC", "VERSION", "P"]
