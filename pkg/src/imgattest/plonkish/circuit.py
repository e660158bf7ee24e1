"""Plonkish grid model: columns, gates, lookups, copies, builder and layout.

Cells are addressed either by :class:`CellRef` or, in bulk, by int64 *keys*
``column << 32 | row``.  Gadgets work on :class:`Cells` (keys plus, when the
builder tracks a witness, their values) so whole images synthesize with a
handful of numpy operations instead of per-cell Python calls.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .. import _kernels
from ..errors import DegreeExceeded, DegreeTooSmall, InvalidLookup, NotFixedColumn, OutOfGrid
from ..field import P
from .expr import Expr, Query, lift

ROW_BITS = 32
ROW_MASK = (1 << ROW_BITS) - 1
MAX_ROWS = 1 << ROW_BITS


class ColumnKind(str, enum.Enum):
    ADVICE = "advice"
    FIXED = "fixed"
    INSTANCE = "instance"
    SELECTOR = "selector"


@dataclass(frozen=True)
class Column:
    index: int
    kind: ColumnKind

    def query(self, rotation: int = 0) -> Query:
        return Query(self.index, rotation)

    @property
    def cur(self) -> Query:
        return Query(self.index, 0)

    @property
    def next(self) -> Query:
        return Query(self.index, 1)

    def cell(self, row: int) -> CellRef:
        return CellRef(row, self.index)


@dataclass(frozen=True, order=True)
class CellRef:
    row: int
    column: int

    @property
    def key(self) -> int:
        return (self.column << ROW_BITS) | self.row


def cell_keys(rows, cols) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    return (cols << ROW_BITS) | rows


def split_keys(keys) -> tuple[np.ndarray, np.ndarray]:
    keys = np.asarray(keys, dtype=np.int64)
    return keys & ROW_MASK, keys >> ROW_BITS


def key_to_cell(key: int) -> CellRef:
    return CellRef(int(key) & ROW_MASK, int(key) >> ROW_BITS)


@dataclass
class Cells:
    """A bundle of cells (int64 keys) and, optionally, their witness values.

    Values are integer representatives of field elements: int64 arrays for
    small (possibly negative) values, object arrays of Python ints otherwise.
    """

    keys: np.ndarray
    values: np.ndarray | None = None

    def __post_init__(self):
        self.keys = np.asarray(self.keys, dtype=np.int64)
        if self.values is not None:
            self.values = np.asarray(self.values)
            if self.values.shape != self.keys.shape:
                raise ValueError("keys/values shape mismatch")

    @classmethod
    def of(cls, cells, builder: CircuitBuilder | None = None) -> Cells:
        """Coerce a CellRef, a sequence of CellRefs, or Cells."""
        if isinstance(cells, Cells):
            return cells
        if isinstance(cells, CellRef):
            cells = [cells]
        keys = np.array([c.key for c in cells], dtype=np.int64)
        vals = builder.values_of(keys) if builder is not None and builder.track_values else None
        return cls(keys, vals)

    @property
    def shape(self):
        return self.keys.shape

    @property
    def size(self) -> int:
        return int(self.keys.size)

    def __len__(self):
        return len(self.keys)

    def __getitem__(self, idx) -> Cells:
        return Cells(self.keys[idx], None if self.values is None else self.values[idx])

    def reshape(self, *shape) -> Cells:
        return Cells(self.keys.reshape(*shape), None if self.values is None else self.values.reshape(*shape))

    def ravel(self) -> Cells:
        return self.reshape(-1)

    def cell(self, i=0) -> CellRef:
        return key_to_cell(self.keys.ravel()[i])

    def value(self, i=0) -> int:
        return int(self.values.ravel()[i]) % P


@dataclass(frozen=True, eq=False)
class CustomGate:
    """``selector * poly == 0`` on every row, for each poly."""

    name: str
    polys: tuple[Expr, ...]
    selector: Column
    category: str = "custom"

    @property
    def polynomial(self) -> Expr:
        return self.polys[0]

    def degree(self) -> int:
        return max(p.degree() for p in self.polys)

    def rotations(self) -> tuple[int, int]:
        rots = [r for p in self.polys for _, r in p.queries()] or [0]
        return min(rots), max(rots)


@dataclass(frozen=True, eq=False)
class LookupArgument:
    """Every selected row's input tuple must appear among the table rows."""

    name: str
    inputs: tuple[Expr, ...]
    table: tuple[Column, ...]
    selector: Column | None = None
    category: str = "custom"


class CopyConstraintSet:
    """Declared cell equalities; classes are their transitive closure."""

    def __init__(self, a: np.ndarray, b: np.ndarray):
        self.a = np.asarray(a, dtype=np.int64)
        self.b = np.asarray(b, dtype=np.int64)
        self._classes = None

    def __len__(self):
        return len(self.a)

    def classes(self) -> tuple[np.ndarray, np.ndarray]:
        """``(cells, root)``: every constrained cell key and its class root key."""
        if self._classes is None:
            cells, inv = np.unique(np.concatenate([self.a, self.b]), return_inverse=True)
            n = len(self.a)
            labels = _kernels.union_find(len(cells), inv[:n], inv[n:])
            self._classes = (cells, cells[labels])
        return self._classes

    def class_of(self, cell: CellRef) -> list[CellRef]:
        cells, roots = self.classes()
        i = np.searchsorted(cells, cell.key)
        if i >= len(cells) or cells[i] != cell.key:
            return [cell]
        return [key_to_cell(k) for k in cells[roots == roots[i]]]

    def partition(self) -> list[frozenset[CellRef]]:
        cells, roots = self.classes()
        order = np.argsort(roots, kind="stable")
        out = []
        for grp in np.split(cells[order], np.flatnonzero(np.diff(roots[order])) + 1):
            if len(grp):
                out.append(frozenset(key_to_cell(k) for k in grp))
        return out


def next_pow2(n: int) -> int:
    n = max(int(n), 1)
    return 1 << (n - 1).bit_length()


def _as_values(values) -> np.ndarray:
    """Normalize witness/fixed values to int64 when they fit, else object."""
    arr = np.asarray(values)
    if arr.dtype == object:
        flat = arr.ravel()
        if flat.size and all(-(1 << 62) < int(v) < (1 << 62) for v in flat[: min(flat.size, 64)]):
            try:
                return arr.astype(np.int64)
            except OverflowError:
                return arr
        return arr
    if arr.dtype.kind in "iub":
        return arr.astype(np.int64, copy=False)
    raise TypeError(f"unsupported value dtype {arr.dtype}")


def _rows_array(rows) -> np.ndarray:
    if isinstance(rows, range):
        return np.arange(rows.start, rows.stop, rows.step, dtype=np.int64)
    return np.atleast_1d(np.asarray(rows, dtype=np.int64))


class CircuitBuilder:
    """Single-owner mutable circuit under construction.

    ``track_values=False`` gives a layout-only ("dry") builder used for cost
    estimation: gadgets skip witness computation but lay out identically.
    """

    def __init__(self, max_degree: int = 9, blinding_rows: int = 6, track_values: bool = True,
                 column_budget: int = 32):
        if max_degree < 3:
            raise DegreeTooSmall(f"max_degree must be >= 3, got {max_degree}")
        if blinding_rows < 1:
            raise ValueError("blinding_rows must be positive")
        self.max_degree = max_degree
        self.blinding_rows = blinding_rows
        self.track_values = track_values
        # advice columns a replicated gadget may span; 0 means one op per row
        self.column_budget = column_budget
        self.columns: list[Column] = []
        self.gates: list[CustomGate] = []
        self.lookups: list[LookupArgument] = []
        self.instance_slots: list[CellRef] = []
        self._instance_values: list[int] = []
        self._advice: dict[int, list[tuple[int, np.ndarray]]] = {}
        self._fixed: dict[int, list[tuple[int, np.ndarray]]] = {}
        self._selected: dict[int, list[np.ndarray]] = {}
        self._table_len: dict[int, int] = {}
        self._copy_a: list[np.ndarray] = []
        self._copy_b: list[np.ndarray] = []
        self._gate_reach: dict[int, tuple[int, int]] = {}
        self._pool: list[Column] = []
        self._shared: dict = {}
        self._used_rows = 0
        self._cursor = 0
        self.region_rows: dict[str, int] = {}

    # -- columns -----------------------------------------------------------

    def _column(self, kind: ColumnKind) -> Column:
        col = Column(len(self.columns), kind)
        self.columns.append(col)
        return col

    def advice_column(self) -> Column:
        col = self._column(ColumnKind.ADVICE)
        self._advice[col.index] = []
        return col

    def fixed_column(self) -> Column:
        col = self._column(ColumnKind.FIXED)
        self._fixed[col.index] = []
        return col

    def instance_column(self) -> Column:
        return self._column(ColumnKind.INSTANCE)

    def selector_column(self) -> Column:
        col = self._column(ColumnKind.SELECTOR)
        self._selected[col.index] = []
        return col

    def advice_pool(self, width: int) -> list[Column]:
        """The first ``width`` shared advice columns, allocating as needed."""
        while len(self._pool) < width:
            self._pool.append(self.advice_column())
        return self._pool[:width]

    @property
    def advice_width(self) -> int:
        return len(self._pool)

    def shared(self, key, factory: Callable[[], object]):
        """Per-circuit memo for reusable gadget configuration (tables, gates)."""
        if key not in self._shared:
            self._shared[key] = factory()
        return self._shared[key]

    # -- rows --------------------------------------------------------------

    @property
    def used_rows(self) -> int:
        return self._used_rows

    def _touch(self, max_row: int):
        if max_row >= MAX_ROWS:
            raise OutOfGrid(f"row {max_row} exceeds the addressable grid")
        if max_row + 1 > self._used_rows:
            self._used_rows = max_row + 1

    def alloc_rows(self, height: int, category: str = "other") -> int:
        """Reserve ``height`` fresh rows across the advice pool; returns the start row."""
        start = max(self._cursor, self._used_rows)
        self._cursor = start + height
        if height:
            self._touch(start + height - 1)
        self.region_rows[category] = self.region_rows.get(category, 0) + height
        return start

    def _check_col(self, col: Column | int, kinds=None) -> Column:
        idx = col.index if isinstance(col, Column) else int(col)
        if not 0 <= idx < len(self.columns):
            raise OutOfGrid(f"column {idx} does not exist")
        c = self.columns[idx]
        if kinds is not None and c.kind not in kinds:
            raise TypeError(f"column {idx} is {c.kind.value}, expected one of {[k.value for k in kinds]}")
        return c

    # -- assignments -------------------------------------------------------

    def assign_advice(self, column: Column | int, row: int, values) -> None:
        c = self._check_col(column, (ColumnKind.ADVICE,))
        vals = _as_values(np.atleast_1d(np.asarray(values) if not isinstance(values, int) else [values]))
        if row < 0:
            raise OutOfGrid("negative row")
        self._touch(row + len(vals) - 1)
        if self.track_values:
            self._advice[c.index].append((row, vals))

    def assign_fixed(self, column: Column | int, row: int, values) -> None:
        c = self._check_col(column, (ColumnKind.FIXED,))
        vals = _as_values(np.atleast_1d(np.asarray(values) if not isinstance(values, int) else [values]))
        if row < 0:
            raise OutOfGrid("negative row")
        if c.index not in self._table_len:
            self._touch(row + len(vals) - 1)
        self._fixed[c.index].append((row, vals))

    def add_table(self, entries: np.ndarray, columns: Sequence[Column] | None = None) -> tuple[Column, ...]:
        """Place a lookup table (rows x cols array) into fresh fixed columns.

        Table rows do not count towards used rows; instead the finalized grid
        must hold ``len(entries) + blinding_rows`` rows.
        """
        ent = np.asarray(entries)
        if ent.ndim == 1:
            ent = ent[:, None]
        if columns is None:
            columns = [self.fixed_column() for _ in range(ent.shape[1])]
        for j, col in enumerate(columns):
            self._check_col(col, (ColumnKind.FIXED,))
            self._table_len[col.index] = len(ent)
            self._fixed[col.index].append((0, _as_values(ent[:, j])))
        return tuple(columns)

    def values_of(self, keys) -> np.ndarray:
        """Slow path: look witness/fixed values up by key (scalar APIs, tests)."""
        keys = np.atleast_1d(np.asarray(keys, dtype=np.int64))
        out = np.zeros(keys.shape, dtype=object)
        for i, k in enumerate(keys.ravel()):
            row, col = int(k) & ROW_MASK, int(k) >> ROW_BITS
            chunks = self._advice.get(col) or self._fixed.get(col) or []
            v = 0
            for start, arr in reversed(chunks):
                if start <= row < start + len(arr):
                    v = int(arr[row - start])
                    break
            out.ravel()[i] = v
        return _as_values(out)

    # -- constraints -------------------------------------------------------

    def add_gate(self, name: str, polys, selector: Column | None = None, category: str = "custom") -> int:
        if isinstance(polys, Expr) or isinstance(polys, int):
            polys = [polys]
        polys = tuple(lift(p) for p in polys)
        if not polys:
            raise ValueError("gate needs at least one polynomial")
        for p in polys:
            for col, _ in p.queries():
                self._check_col(col)
            if p.degree() + 1 > self.max_degree:
                raise DegreeExceeded(
                    f"gate {name!r}: degree {p.degree()} + selector exceeds max {self.max_degree}"
                )
        if selector is None:
            selector = self.selector_column()
        else:
            self._check_col(selector, (ColumnKind.SELECTOR,))
        gate = CustomGate(name, polys, selector, category)
        self.gates.append(gate)
        gid = len(self.gates) - 1
        self._gate_reach[gid] = gate.rotations()
        return gid

    def enable_selector(self, selector: Column, rows, reach: tuple[int, int] = (0, 0)) -> None:
        self._check_col(selector, (ColumnKind.SELECTOR,))
        r = _rows_array(rows)
        if not r.size:
            return
        lo, hi = int(r.min()), int(r.max())
        if lo + reach[0] < 0:
            raise OutOfGrid(f"rotation {reach[0]} leaves the grid at row {lo}")
        self._touch(hi + max(reach[1], 0))
        self._selected[selector.index].append(r)

    def enable_gate(self, gate_id: int, rows) -> None:
        gate = self.gates[gate_id]
        reach = self._selector_reach(gate.selector)
        self.enable_selector(gate.selector, rows, reach)

    def _selector_reach(self, selector: Column) -> tuple[int, int]:
        lo, hi = 0, 0
        for gid, g in enumerate(self.gates):
            if g.selector.index == selector.index:
                a, b = self._gate_reach[gid]
                lo, hi = min(lo, a), max(hi, b)
        return lo, hi

    def add_lookup(self, inputs, table: Sequence[Column], selector: Column | None = None,
                   name: str = "lookup", category: str = "custom") -> int:
        inputs = tuple(lift(e) for e in (inputs if isinstance(inputs, (list, tuple)) else [inputs]))
        if not inputs:
            raise InvalidLookup("lookup needs at least one input expression")
        if len(inputs) != len(table):
            raise InvalidLookup(f"{len(inputs)} inputs against a {len(table)}-column table")
        for col in table:
            c = self._check_col(col)
            if c.kind is not ColumnKind.FIXED:
                raise NotFixedColumn(f"lookup table column {c.index} is {c.kind.value}")
        for e in inputs:
            if e.degree() + (selector is not None) > self.max_degree:
                raise DegreeExceeded(f"lookup {name!r} input degree too high")
        if selector is not None:
            self._check_col(selector, (ColumnKind.SELECTOR,))
        self.lookups.append(LookupArgument(name, inputs, tuple(table), selector, category))
        return len(self.lookups) - 1

    def add_copy(self, a: CellRef, b: CellRef) -> None:
        self.add_copies(np.array([a.key]), np.array([b.key]))

    def add_copies(self, keys_a, keys_b) -> None:
        ka = np.asarray(keys_a, dtype=np.int64).ravel()
        kb = np.asarray(keys_b, dtype=np.int64).ravel()
        if ka.shape != kb.shape:
            raise ValueError("copy endpoint arrays differ in length")
        if not ka.size:
            return
        for keys in (ka, kb):
            rows, cols = split_keys(keys)
            if rows.min() < 0 or cols.min() < 0 or cols.max() >= len(self.columns):
                raise OutOfGrid("copy endpoint outside the grid")
            self._touch(int(rows.max()))
        self._copy_a.append(ka)
        self._copy_b.append(kb)

    def expose(self, cell: CellRef, value: int | None = None) -> int:
        """Register ``cell`` as the next public instance slot."""
        self._check_col(cell.column)
        self._touch(cell.row)
        self.instance_slots.append(cell)
        if value is None and self.track_values:
            value = int(self.values_of([cell.key])[0])
        self._instance_values.append(0 if value is None else int(value) % P)
        return len(self.instance_slots) - 1

    # -- output ------------------------------------------------------------

    def finalize(self) -> CircuitLayout:
        if not self.columns:
            raise ValueError("circuit has no columns")
        table_floor = max((n + self.blinding_rows for n in self._table_len.values()), default=0)
        rows = next_pow2(max(self._used_rows, table_floor, 1))
        selectors = {
            idx: (np.unique(np.concatenate(chunks)) if chunks else np.zeros(0, dtype=np.int64))
            for idx, chunks in self._selected.items()
        }
        copies = CopyConstraintSet(
            np.concatenate(self._copy_a) if self._copy_a else np.zeros(0, dtype=np.int64),
            np.concatenate(self._copy_b) if self._copy_b else np.zeros(0, dtype=np.int64),
        )
        return CircuitLayout(
            rows=rows,
            columns=tuple(self.columns),
            gates=tuple(self.gates),
            lookups=tuple(self.lookups),
            copies=copies,
            fixed_chunks={k: tuple(v) for k, v in self._fixed.items()},
            selector_rows=selectors,
            table_lengths=dict(self._table_len),
            instance_slots=tuple(self.instance_slots),
            max_degree=self.max_degree,
            blinding_rows=self.blinding_rows,
            used_rows=self._used_rows,
            region_rows=dict(self.region_rows),
        )

    def witness(self, layout: CircuitLayout) -> WitnessGrid:
        if not self.track_values:
            raise RuntimeError("layout-only builder carries no witness")
        cols = {}
        for idx, chunks in self._advice.items():
            cols[idx] = _dense(layout.rows, chunks)
        return WitnessGrid(layout.rows, cols)

    def instance(self) -> list[int]:
        return list(self._instance_values)


def _dense(rows: int, chunks) -> np.ndarray:
    """Materialize (start, values) chunks into one column, smallest fitting dtype."""
    if any(arr.dtype == object for _, arr in chunks):
        out = np.zeros(rows, dtype=object)
    else:
        lo = min((int(a.min()) for _, a in chunks if a.size), default=0)
        hi = max((int(a.max()) for _, a in chunks if a.size), default=0)
        dtype = np.uint8 if 0 <= lo and hi <= 255 else np.int64
        out = np.zeros(rows, dtype=dtype)
    for start, arr in chunks:
        out[start : start + len(arr)] = arr
    return out


@dataclass(frozen=True, eq=False)
class CircuitLayout:
    """Immutable compiled circuit; plays the role of a verification key."""

    rows: int
    columns: tuple[Column, ...]
    gates: tuple[CustomGate, ...]
    lookups: tuple[LookupArgument, ...]
    copies: CopyConstraintSet
    fixed_chunks: Mapping[int, tuple[tuple[int, np.ndarray], ...]]
    selector_rows: Mapping[int, np.ndarray]
    table_lengths: Mapping[int, int]
    instance_slots: tuple[CellRef, ...]
    max_degree: int = 9
    blinding_rows: int = 6
    used_rows: int = 0
    region_rows: Mapping[str, int] = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def columns_of(self, kind: ColumnKind) -> list[Column]:
        return [c for c in self.columns if c.kind is kind]

    @property
    def advice_columns(self) -> list[Column]:
        return self.columns_of(ColumnKind.ADVICE)

    def fixed_values(self, col: int) -> np.ndarray:
        """Dense fixed column (unassigned cells are 0)."""
        key = ("fixed", col)
        if key not in self._cache:
            self._cache[key] = _dense(self.rows, self.fixed_chunks.get(col, ()))
        return self._cache[key]

    def selector_values(self, col: int) -> np.ndarray:
        out = np.zeros(self.rows, dtype=np.uint8)
        out[self.selector_rows.get(col, np.zeros(0, dtype=np.int64))] = 1
        return out

    def table_values(self, lookup: LookupArgument) -> list[np.ndarray]:
        out = []
        for c in lookup.table:
            n = self.table_lengths.get(c.index)
            dense = self.fixed_values(c.index)
            out.append(dense[: n if n is not None else self.rows])
        return out

    def stats(self) -> dict:
        n_fixed = sum(1 for c in self.columns if c.kind in (ColumnKind.FIXED, ColumnKind.SELECTOR))
        cats: dict[str, int] = {}
        for g in self.gates:
            cats[g.category] = cats.get(g.category, 0) + 1
        return {
            "rows": self.rows,
            "used_rows": self.used_rows,
            "advice_columns": len(self.advice_columns),
            "fixed_columns": n_fixed,
            "instance_columns": len(self.columns_of(ColumnKind.INSTANCE)),
            "total_columns": len(self.columns),
            "gates": len(self.gates),
            "gates_by_category": cats,
            "lookups": len(self.lookups),
            "copies": len(self.copies),
            "tables": len({tuple(c.index for c in lk.table) for lk in self.lookups}),
            "region_rows": dict(self.region_rows),
        }

    def to_bytes(self) -> bytes:
        from .serial import layout_to_bytes

        return layout_to_bytes(self)

    @classmethod
    def from_bytes(cls, data: bytes) -> CircuitLayout:
        from .serial import layout_from_bytes

        return layout_from_bytes(data)

    def dump(self) -> str:
        from .serial import layout_dump

        return layout_dump(self)


class WitnessGrid:
    """Advice-column assignment for one execution (values mod p)."""

    def __init__(self, rows: int, columns: Mapping[int, np.ndarray]):
        self.rows = rows
        self.columns = dict(columns)
        for idx, arr in self.columns.items():
            if len(arr) != rows:
                raise ValueError(f"advice column {idx} has {len(arr)} rows, expected {rows}")

    def column(self, idx: int) -> np.ndarray:
        return self.columns[idx]

    def get(self, row: int, col: int) -> int:
        return int(self.columns[col][row]) % P

    def __getitem__(self, cell: CellRef) -> int:
        return self.get(cell.row, cell.column)

    def set(self, row: int, col: int, value: int) -> None:
        arr = self.columns[col]
        value = int(value)
        if arr.dtype != object:
            info = np.iinfo(arr.dtype)
            if not info.min <= value <= info.max:
                arr = arr.astype(object)
                self.columns[col] = arr
        arr[row] = value

    def __setitem__(self, cell: CellRef, value: int) -> None:
        self.set(cell.row, cell.column, value)

    def values_at(self, keys) -> np.ndarray:
        rows, cols = split_keys(keys)
        out = np.zeros(rows.shape, dtype=object)
        for c in np.unique(cols):
            m = cols == c
            out[m] = self.columns[int(c)][rows[m]].astype(object)
        return out

    def copy(self) -> WitnessGrid:
        return WitnessGrid(self.rows, {k: v.copy() for k, v in self.columns.items()})


def iter_rows(rows: Iterable[int]) -> np.ndarray:
    return _rows_array(rows)
