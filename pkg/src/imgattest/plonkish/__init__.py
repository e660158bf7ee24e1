"""Plonkish circuit model, builder and constraint checker."""

from .check import SatisfactionReport, Violation, check_constraints, read_cells
from .circuit import (
    CellRef,
    Cells,
    CircuitBuilder,
    CircuitLayout,
    Column,
    ColumnKind,
    CopyConstraintSet,
    CustomGate,
    LookupArgument,
    WitnessGrid,
    cell_keys,
    next_pow2,
    split_keys,
)
from .expr import Constant, Expr, Query


def builder_new(max_degree: int = 9, blinding_rows: int = 6, track_values: bool = True) -> CircuitBuilder:
    return CircuitBuilder(max_degree, blinding_rows, track_values)


def add_copy(builder: CircuitBuilder, a: CellRef, b: CellRef) -> None:
    builder.add_copy(a, b)


def add_lookup(builder: CircuitBuilder, inputs, table, selector=None) -> int:
    return builder.add_lookup(inputs, table, selector)


def add_gate(builder: CircuitBuilder, name: str, polynomial, selector=None) -> int:
    return builder.add_gate(name, polynomial, selector)


def finalize(builder: CircuitBuilder) -> CircuitLayout:
    return builder.finalize()


__all__ = [
    "CellRef", "Cells", "CircuitBuilder", "CircuitLayout", "Column", "ColumnKind", "Constant",
    "CopyConstraintSet", "CustomGate", "Expr", "LookupArgument", "Query", "SatisfactionReport",
    "Violation", "WitnessGrid", "add_copy", "add_gate", "add_lookup", "builder_new", "cell_keys",
    "check_constraints", "finalize", "read_cells", "next_pow2", "split_keys",
]
