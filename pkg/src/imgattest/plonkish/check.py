"""Constraint-satisfaction checker (the desk-scale stand-in for prove + verify)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import _kernels
from ..errors import DimensionMismatch
from ..field import P
from .circuit import CellRef, CircuitLayout, ColumnKind, WitnessGrid, key_to_cell, split_keys

KINDS = ("gate", "lookup", "copy", "instance")
BATCH = 1 << 16
_INT_SAFE = 1 << 62


@dataclass(frozen=True)
class Violation:
    kind: str
    location: dict
    detail: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "location": dict(self.location), "detail": self.detail}

    @classmethod
    def from_dict(cls, d: dict) -> Violation:
        return cls(d["kind"], dict(d.get("location", {})), d.get("detail", ""))


@dataclass
class SatisfactionReport:
    violations: list[Violation] = field(default_factory=list)
    truncated: bool = False

    @property
    def satisfied(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.satisfied

    def of_kind(self, kind: str) -> list[Violation]:
        return [v for v in self.violations if v.kind == kind]

    def counts(self) -> dict[str, int]:
        out = {k: 0 for k in KINDS}
        for v in self.violations:
            out[v.kind] = out.get(v.kind, 0) + 1
        return out

    def summary(self) -> str:
        if self.satisfied:
            return "satisfied"
        parts = [f"{n} {k}" for k, n in self.counts().items() if n]
        more = " (truncated)" if self.truncated else ""
        return f"unsatisfied: {', '.join(parts)}{more}; first: {self.violations[0].detail}"

    def to_dict(self) -> dict:
        return {
            "satisfied": self.satisfied,
            "truncated": self.truncated,
            "violations": [v.to_dict() for v in self.violations],
        }

    @classmethod
    def from_dict(cls, d: dict) -> SatisfactionReport:
        rep = cls([Violation.from_dict(v) for v in d.get("violations", [])], bool(d.get("truncated", False)))
        if bool(d.get("satisfied", rep.satisfied)) != rep.satisfied:
            raise ValueError("report 'satisfied' flag disagrees with its violation list")
        return rep


class _Full(Exception):
    pass


class _Grid:
    """Dense read access to every column of a (layout, witness, instance) triple."""

    def __init__(self, layout: CircuitLayout, witness: WitnessGrid, instance: Sequence[int]):
        self.layout = layout
        self.rows = layout.rows
        self.cols: dict[int, np.ndarray] = {}
        inst_cols: dict[int, np.ndarray] = {}
        for i, cell in enumerate(layout.instance_slots):
            if layout.columns[cell.column].kind is ColumnKind.INSTANCE:
                arr = inst_cols.setdefault(cell.column, np.zeros(self.rows, dtype=object))
                arr[cell.row] = int(instance[i]) % P
        for c in layout.columns:
            if c.kind is ColumnKind.ADVICE:
                self.cols[c.index] = witness.columns[c.index]
            elif c.kind is ColumnKind.FIXED:
                self.cols[c.index] = layout.fixed_values(c.index)
            elif c.kind is ColumnKind.SELECTOR:
                self.cols[c.index] = layout.selector_values(c.index)
            else:
                self.cols[c.index] = inst_cols.get(c.index, np.zeros(self.rows, dtype=np.int64))

    def gather(self, keys: np.ndarray) -> np.ndarray:
        """Values at cell keys; int64 when every source column is integral."""
        rows, cols = split_keys(keys)
        ucols = np.unique(cols)
        as_obj = any(self.cols[int(c)].dtype == object for c in ucols)
        out = np.zeros(len(keys), dtype=object if as_obj else np.int64)
        for c in ucols:
            m = cols == c
            out[m] = self.cols[int(c)][rows[m]]
        return out


def _nonzero_mod_p(v, n: int) -> np.ndarray:
    if isinstance(v, np.ndarray):
        return (v % P) != 0
    return np.full(n, int(v) % P != 0)


def _canonical_int64(v, n: int):
    """Reduce evaluated lookup inputs to canonical int64, or None if any is huge."""
    if not isinstance(v, np.ndarray):
        v = np.full(n, int(v), dtype=object)
    if v.dtype != object:
        # small signed representatives: negatives are huge canonically, never in a table
        v = v.astype(np.int64)
        return np.where(v < 0, _INT_SAFE, v)
    v = v % P
    if len(v) and max(v) >= _INT_SAFE:
        return None
    return v.astype(np.int64)


class _Checker:
    def __init__(self, layout, witness, instance, max_violations):
        self.layout = layout
        self.grid = _Grid(layout, witness, instance)
        self.instance = [int(x) % P for x in instance]
        self.max = max_violations
        self.out: list[Violation] = []
        self.truncated = False

    def add(self, v: Violation):
        if self.max is not None and len(self.out) >= self.max:
            self.truncated = True
            raise _Full
        self.out.append(v)

    def fetcher(self, rows: np.ndarray, as_object: bool = True):
        n = self.layout.rows

        def fetch(col, rot):
            idx = rows + rot
            if rot and (idx.min() < 0 or idx.max() >= n):
                idx = np.clip(idx, 0, n - 1)
            arr = self.grid.cols[col][idx]
            return arr.astype(object) if as_object and arr.dtype != object else arr

        return fetch

    # -- gates -------------------------------------------------------------

    def gates(self):
        n = self.layout.rows
        for gid, gate in enumerate(self.layout.gates):
            rows_all = self.layout.selector_rows.get(gate.selector.index, np.zeros(0, dtype=np.int64))
            lo, hi = gate.rotations()
            for start in range(0, len(rows_all), BATCH):
                rows = rows_all[start : start + BATCH]
                escaped = (rows + lo < 0) | (rows + hi >= n)
                for r in rows[escaped]:
                    self.add(Violation("gate", {"gate": gid, "row": int(r)},
                                       f"gate {gate.name!r} rotation leaves the grid at row {int(r)}"))
                fetch = self.fetcher(rows)
                cache: dict = {}
                for k, poly in enumerate(gate.polys):
                    bad = _nonzero_mod_p(poly.evaluate(fetch, cache), len(rows)) & ~escaped
                    for r in rows[bad]:
                        self.add(Violation("gate", {"gate": gid, "row": int(r), "poly": k},
                                           f"gate {gate.name!r} (poly {k}) nonzero at row {int(r)}"))

    # -- lookups -----------------------------------------------------------

    def _table_index(self, lk):
        key = ("lookup-table", tuple(c.index for c in lk.table))
        cache = self.layout._cache
        if key in cache:
            return cache[key]
        cols = self.layout.table_values(lk)
        canon = []
        for c in cols:
            canon.append(c.astype(object) % P)
        fits = all(len(c) == 0 or max(c) < _INT_SAFE for c in canon)
        index = None
        if fits:
            canon = [np.asarray(c, dtype=np.int64) for c in canon]
            radix = [int(c.max()) + 1 if len(c) else 1 for c in canon]
            total = 1
            for r in radix:
                total *= r
            if total < _INT_SAFE:
                keys = np.zeros(len(canon[0]), dtype=np.int64)
                for c, r in zip(canon, radix):
                    keys = keys * r + c
                index = ("radix", radix, np.unique(keys))
        if index is None:
            index = ("set", None, set(zip(*[[int(v) for v in c] for c in canon])))
        cache[key] = index
        return index

    def lookups(self):
        for lid, lk in enumerate(self.layout.lookups):
            if lk.selector is not None:
                rows_all = self.layout.selector_rows.get(lk.selector.index, np.zeros(0, dtype=np.int64))
            else:
                rows_all = np.arange(self.layout.rows, dtype=np.int64)
            if not len(rows_all):
                continue
            mode, radix, table = self._table_index(lk)
            for start in range(0, len(rows_all), BATCH):
                rows = rows_all[start : start + BATCH]
                fetch = self.fetcher(rows)
                cache: dict = {}
                vals = [e.evaluate(fetch, cache) for e in lk.inputs]
                ok = None
                if mode == "radix":
                    ints = [_canonical_int64(v, len(rows)) for v in vals]
                    if all(i is not None for i in ints):
                        inside = np.ones(len(rows), dtype=bool)
                        keys = np.zeros(len(rows), dtype=np.int64)
                        for i, r in zip(ints, radix):
                            inside &= (i >= 0) & (i < r)
                            keys = keys * r + np.where((i >= 0) & (i < r), i, 0)
                        ok = inside & _kernels.member_sorted(keys, table)
                if ok is None:
                    tset = table if mode == "set" else None
                    if tset is None:
                        tset = set(zip(*[[int(v) for v in c] for c in self.layout.table_values(lk)]))
                        tset = {tuple(x % P for x in t) for t in tset}
                    objs = [v % P if isinstance(v, np.ndarray) else np.full(len(rows), int(v) % P, dtype=object)
                            for v in vals]
                    ok = np.array([tuple(int(x) for x in t) in tset for t in zip(*objs)], dtype=bool)
                for i in np.flatnonzero(~ok):
                    r = int(rows[i])
                    tup = tuple(int(v[i]) % P if isinstance(v, np.ndarray) else int(v) % P for v in vals)
                    self.add(Violation("lookup", {"lookup": lid, "row": r},
                                       f"lookup {lk.name!r} input {tup} at row {r} not in table"))

    # -- copies ------------------------------------------------------------

    def copies(self):
        cp = self.layout.copies
        if not len(cp):
            return
        va = self.grid.gather(cp.a)
        vb = self.grid.gather(cp.b)
        if va.dtype == object or vb.dtype == object:
            bad = ((va.astype(object) - vb.astype(object)) % P) != 0
        else:
            bad = va != vb
        if not bad.any():
            return
        cells, roots = cp.classes()
        bad_keys = cp.a[bad]
        bad_roots = np.unique(roots[np.searchsorted(cells, bad_keys)])
        for root in bad_roots:
            members = cells[roots == root]
            vals = sorted({int(v) % P for v in self.grid.gather(members)})
            rc = key_to_cell(root)
            self.add(Violation("copy", {"row": rc.row, "column": rc.column, "class_size": int(len(members))},
                               f"copy class of c[{rc.row}][{rc.column}] ({len(members)} cells) "
                               f"holds {len(vals)} distinct values"))

    # -- instance ----------------------------------------------------------

    def instance_slots(self):
        slots = self.layout.instance_slots
        if not slots:
            return
        keys = np.array([c.key for c in slots], dtype=np.int64)
        got = self.grid.gather(keys)
        for i, (cell, v) in enumerate(zip(slots, got)):
            if int(v) % P != self.instance[i]:
                self.add(Violation("instance", {"slot": i, "row": cell.row, "column": cell.column},
                                   f"instance slot {i} at c[{cell.row}][{cell.column}] disagrees with public value"))

    def run(self) -> SatisfactionReport:
        try:
            self.gates()
            self.lookups()
            self.copies()
            self.instance_slots()
        except _Full:
            pass
        return SatisfactionReport(self.out, self.truncated)


def check_constraints(layout: CircuitLayout, witness: WitnessGrid, instance: Sequence[int],
                      max_violations: int | None = 1000) -> SatisfactionReport:
    """Evaluate every gate, lookup, copy class and instance slot.

    Violations are collected in a fixed order (gates, lookups, copies,
    instance) so identical inputs always give identical reports.
    """
    if witness.rows != layout.rows:
        raise DimensionMismatch(f"witness has {witness.rows} rows, layout has {layout.rows}")
    adv = {c.index for c in layout.advice_columns}
    if set(witness.columns) != adv:
        raise DimensionMismatch("witness advice columns do not match the layout")
    if len(instance) != len(layout.instance_slots):
        raise DimensionMismatch(
            f"{len(instance)} instance values for {len(layout.instance_slots)} slots"
        )
    return _Checker(layout, witness, [int(x) for x in instance], max_violations).run()


def cell_value(layout: CircuitLayout, witness: WitnessGrid, cell: CellRef) -> int:
    kind = layout.columns[cell.column].kind
    if kind is ColumnKind.ADVICE:
        return witness.get(cell.row, cell.column)
    if kind is ColumnKind.FIXED:
        return int(layout.fixed_values(cell.column)[cell.row]) % P
    if kind is ColumnKind.SELECTOR:
        return int(layout.selector_values(cell.column)[cell.row])
    raise ValueError("instance cells take their values from the instance vector")


def read_cells(layout: CircuitLayout, witness: WitnessGrid, keys, instance: Sequence[int] = ()) -> np.ndarray:
    """Values of arbitrary (advice, fixed, selector or instance) cells by key."""
    inst = list(instance) or [0] * len(layout.instance_slots)
    keys = np.asarray(keys, dtype=np.int64)
    return _Grid(layout, witness, inst).gather(keys.ravel()).reshape(keys.shape)
