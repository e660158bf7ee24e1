"""Circuit synthesis for transforms over (H, W, 3) grids of byte cells."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import gadgets
from ..plonkish.circuit import Cells, CircuitBuilder
from .native import (
    SCALE,
    channel_maps,
    conv_bounds,
    conv_kernel,
    fixed_point_matrix,
    quotient_bounds,
    remap,
)
from .spec import COLORSPACE, CONVOLUTION, GEOMETRIC, POINTWISE, Kind, TransformSpec


@dataclass(frozen=True)
class RowPack:
    """Row-packing strategy: ``k`` copies of a ``width``-cell op per row."""

    width: int
    k: int

    def rows(self, n_ops: int) -> int:
        return math.ceil(n_ops / self.k)

    @property
    def columns(self) -> int:
        return self.width * self.k


def row_pack(cells_per_op: int, column_budget: int | None = None) -> RowPack:
    return RowPack(cells_per_op, gadgets.replicas(cells_per_op, column_budget))


def _stack(channels: list[Cells], shape) -> Cells:
    keys = np.stack([c.keys for c in channels], axis=-1).reshape(shape)
    vals = None
    if all(c.values is not None for c in channels):
        vals = np.stack([np.asarray(c.values, dtype=np.int64) for c in channels], axis=-1).reshape(shape)
    return Cells(keys, vals)


def synth_copy_geometry(b: CircuitBuilder, spec: TransformSpec, grid: Cells) -> Cells:
    fill = gadgets.zero_key(b) if spec.kind in (Kind.TRANSLATE, Kind.CENSOR) else 0
    keys = np.ascontiguousarray(remap(grid.keys, spec, fill))
    vals = None if grid.values is None else np.ascontiguousarray(remap(grid.values, spec, 0))
    return Cells(keys, vals)


def synth_pointwise_lut(b: CircuitBuilder, spec: TransformSpec, grid: Cells) -> Cells:
    maps = channel_maps(spec)
    groups: dict[bytes, list[int]] = {}
    for c, m in enumerate(maps):
        groups.setdefault(m.tobytes(), []).append(c)
    keys = np.empty(grid.keys.shape, dtype=np.int64)
    vals = None if grid.values is None else np.empty(grid.keys.shape, dtype=np.int64)
    for chans in groups.values():
        sub = grid[..., chans]
        out = gadgets.apply_map(b, sub.ravel(), maps[chans[0]])
        keys[..., chans] = out.keys.reshape(sub.shape)
        if vals is not None:
            vals[..., chans] = out.values.reshape(sub.shape)
    return Cells(keys, vals)


def synth_colorspace(b: CircuitBuilder, spec: TransformSpec, grid: Cells) -> Cells:
    K, off = fixed_point_matrix(spec.kind)
    lo, hi = quotient_bounds(K, off)
    pix = grid.reshape(-1, 3)
    outs = []
    for k in range(3):
        y = gadgets.dot_const(b, pix, K[k].tolist(), int(off[k]))
        q, _ = gadgets.div_const(b, y, SCALE, quotient_bits=None)
        outs.append(gadgets.clamp(b, q, lo, hi))
    return _stack(outs, grid.shape)


def neighbor_cells(grid: Cells, kernel: np.ndarray) -> tuple[Cells, list[int]]:
    """Per output sub-pixel, the cells ``x[m-i][n-j]`` for every nonzero tap ``h[i][j]``.

    Borders replicate by aliasing the nearest edge cell.
    """
    H, W = grid.shape[:2]
    pk = np.pad(grid.keys, ((1, 1), (1, 1), (0, 0)), mode="edge")
    pv = None if grid.values is None else np.pad(grid.values, ((1, 1), (1, 1), (0, 0)), mode="edge")
    keys, vals, coeffs = [], [], []
    for i in (-1, 0, 1):
        for j in (-1, 0, 1):
            c = int(kernel[i + 1, j + 1])
            if not c:
                continue
            sl = (slice(1 - i, 1 - i + H), slice(1 - j, 1 - j + W))
            keys.append(pk[sl].reshape(-1))
            if pv is not None:
                vals.append(pv[sl].reshape(-1))
            coeffs.append(c)
    cells = Cells(np.stack(keys, axis=1), np.stack(vals, axis=1) if pv is not None else None)
    return cells, coeffs


def synth_convolution(b: CircuitBuilder, spec: TransformSpec, grid: Cells) -> Cells:
    h, div, bias = conv_kernel(spec.kind)
    lo, hi = conv_bounds(spec.kind)
    taps, coeffs = neighbor_cells(grid, h)
    y = gadgets.dot_const(b, taps, coeffs, bias)
    if div > 1:
        y, _ = gadgets.div_const(b, y, div, quotient_bits=None)
    out = gadgets.clamp(b, y, lo, hi)
    return out.reshape(*grid.shape)


def synthesize(b: CircuitBuilder, spec: TransformSpec, grid: Cells) -> Cells:
    """Constrain ``spec`` applied to ``grid``; returns the output grid."""
    k = spec.kind
    if k in GEOMETRIC:
        return synth_copy_geometry(b, spec, grid)
    if k in POINTWISE:
        return synth_pointwise_lut(b, spec, grid)
    if k in COLORSPACE:
        return synth_colorspace(b, spec, grid)
    if k in CONVOLUTION:
        return synth_convolution(b, spec, grid)
    raise ValueError(f"unknown transform {k}")
