"""Pipeline parsing, cost model, segment planning, proving and chain verification.

A pipeline is split into contiguous segments.  Each segment circuit
witnesses its input image, hashes it in-circuit (h_in), applies its
transforms and hashes the result (h_out); consecutive segments link because
h_out of one equals h_in of the next.
"""

from __future__ import annotations

import hashlib
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import gadgets
from .errors import (
    ConstraintFailure,
    DimensionMismatch,
    EmptyPipeline,
    InfeasibleLimit,
    InvalidParams,
    ParseError,
)
from .field import P, encode
from .image import Image
from .plonkish.check import SatisfactionReport, Violation, check_constraints
from .plonkish.circuit import CircuitBuilder, CircuitLayout, WitnessGrid
from .poseidon import hash_gadget, hash_image
from .transforms.native import apply_native
from .transforms.spec import Kind, Region, TransformSpec
from .transforms.synth import synthesize

GiB = 1 << 30
DEFAULT_MEM_LIMIT = 8 * GiB
BYTES_PER_CELL = 32
CALIBRATION = 4


# -- pipeline text -------------------------------------------------------------


@dataclass(frozen=True)
class PipelineSpec:
    source: tuple[int, int]  # (width, height)
    transforms: tuple[TransformSpec, ...]
    reveal: str = "image"  # "image" or "hash"

    def dims(self) -> list[tuple[int, int]]:
        """Image size before each transform, plus the final size."""
        out = [self.source]
        for t in self.transforms:
            out.append(t.output_dims(out[-1]))
        return out

    @property
    def output_dims(self) -> tuple[int, int]:
        return self.dims()[-1]

    def text(self) -> str:
        lines = [f"source {self.source[0]}x{self.source[1]}"]
        lines += [t.text() for t in self.transforms]
        lines.append(f"reveal {self.reveal}")
        return "\n".join(lines) + "\n"


_TOKEN = re.compile(r"\S+")
_DIMS = re.compile(r"^(\d+)x(\d+)$")


def _parse_value(raw: str, line: int, col: int):
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    if re.fullmatch(r"[A-Za-z_]+", raw):
        return raw
    raise ParseError(f"bad value {raw!r}", line, col)


def _parse_kv(tokens, line: int) -> dict:
    out = {}
    for col, tok in tokens:
        if "=" not in tok:
            raise ParseError(f"expected key=value, got {tok!r}", line, col)
        k, v = tok.split("=", 1)
        if not k or not v:
            raise ParseError(f"expected key=value, got {tok!r}", line, col)
        if k in out:
            raise ParseError(f"duplicate key {k!r}", line, col)
        out[k] = (_parse_value(v, line, col + len(k) + 1), col)
    return out


def _parse_regions(tokens, line: int) -> list[Region]:
    shapes = {"rect": ("x", "y", "w", "h"), "oval": ("cx", "cy", "rx", "ry")}
    regions = []
    i = 0
    while i < len(tokens):
        col, shape = tokens[i]
        if shape not in shapes:
            raise ParseError(f"expected a censor shape (rect/oval), got {shape!r}", line, col)
        keys = shapes[shape]
        kv = _parse_kv(tokens[i + 1 : i + 1 + len(keys)], line)
        if set(kv) != set(keys):
            bad = sorted(set(kv) ^ set(keys))
            raise ParseError(f"censor {shape} needs keys {', '.join(keys)} (problem: {bad})", line, col)
        vals = []
        for k in keys:
            v, vcol = kv[k]
            if not isinstance(v, int):
                raise ParseError(f"{k} must be an integer", line, vcol)
            vals.append(v)
        regions.append(Region(shape, *vals))
        i += 1 + len(keys)
    return regions


def _transform_from_tokens(tokens, ln: int) -> TransformSpec:
    col, word = tokens[0]
    try:
        kind = Kind(word.lower())
    except ValueError:
        raise ParseError(f"unknown transform {word!r}", ln, col) from None
    try:
        if kind is Kind.CENSOR:
            return TransformSpec.make(kind, regions=_parse_regions(tokens[1:], ln))
        kv = _parse_kv(tokens[1:], ln)
        return TransformSpec.make(kind, **{k: v for k, (v, _) in kv.items()})
    except InvalidParams as e:
        raise ParseError(str(e), ln, col) from None


def parse_transform(line: str) -> TransformSpec:
    """One transform in its text form (no dimension checks)."""
    tokens = [(m.start() + 1, m.group()) for m in _TOKEN.finditer(line.split("#", 1)[0])]
    if not tokens:
        raise ParseError("empty transform", 1, 1)
    return _transform_from_tokens(tokens, 1)


def parse_pipeline(text: str) -> PipelineSpec:
    source = None
    reveal = None
    transforms: list[TransformSpec] = []
    dims = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        tokens = [(m.start() + 1, m.group()) for m in _TOKEN.finditer(body)]
        if not tokens:
            continue
        col, word = tokens[0]
        word = word.lower()
        if reveal is not None:
            raise ParseError("nothing may follow the reveal line", ln, col)
        if word == "source":
            if source is not None:
                raise ParseError("duplicate source line", ln, col)
            if len(tokens) != 2 or not _DIMS.match(tokens[1][1]):
                raise ParseError("expected 'source WxH'", ln, col)
            m = _DIMS.match(tokens[1][1])
            source = dims = (int(m.group(1)), int(m.group(2)))
            if 0 in source:
                raise ParseError("source dimensions must be positive", ln, tokens[1][0])
            continue
        if source is None:
            raise ParseError("pipeline must start with 'source WxH'", ln, col)
        if word == "reveal":
            if len(tokens) != 2 or tokens[1][1] not in ("image", "hash"):
                raise ParseError("expected 'reveal image' or 'reveal hash'", ln, col)
            reveal = tokens[1][1]
            continue
        spec = _transform_from_tokens(tokens, ln)
        try:
            dims = spec.output_dims(dims)
        except InvalidParams as e:
            raise DimensionMismatch(f"line {ln}: transform {len(transforms) + 1} ({spec.text()}): {e}") from None
        transforms.append(spec)
    if source is None:
        raise EmptyPipeline("missing 'source WxH' header")
    if not transforms:
        raise EmptyPipeline("pipeline has no transforms")
    return PipelineSpec(source, tuple(transforms), reveal or "image")


# -- cost model ----------------------------------------------------------------


@dataclass(frozen=True)
class CostEstimate:
    useful_rows: int
    padded_rows: int
    advice_columns: int
    fixed_columns: int
    instance_columns: int
    lookup_count: int
    gate_count: int
    hash_rows: int
    transform_rows: int
    pack_rows: int
    bytes_per_cell: int = BYTES_PER_CELL * CALIBRATION

    @property
    def total_columns(self) -> int:
        return self.advice_columns + self.fixed_columns + self.instance_columns

    @property
    def estimated_cells(self) -> int:
        return self.padded_rows * self.total_columns

    @property
    def estimated_peak_memory(self) -> int:
        return self.estimated_cells * self.bytes_per_cell

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(total_columns=self.total_columns, estimated_cells=self.estimated_cells,
                 estimated_peak_memory=self.estimated_peak_memory)
        return d


def cost_of_layout(layout: CircuitLayout, calibration: int = CALIBRATION) -> CostEstimate:
    s = layout.stats()
    regions = s["region_rows"]
    return CostEstimate(
        useful_rows=layout.used_rows,
        padded_rows=layout.rows,
        advice_columns=s["advice_columns"],
        fixed_columns=s["fixed_columns"],
        instance_columns=s["instance_columns"],
        lookup_count=s["lookups"],
        gate_count=s["gates"],
        hash_rows=regions.get("hash", 0),
        transform_rows=regions.get("transform", 0),
        pack_rows=regions.get("pack", 0),
        bytes_per_cell=BYTES_PER_CELL * calibration,
    )


def synthesize_segment(b: CircuitBuilder, transforms, in_dims, image: Image | None = None,
                       hash_in: bool = True, hash_out: bool = True):
    """Lay out one segment; returns the output grid cells."""
    w, h = in_dims
    if image is not None and image.dims != (w, h):
        raise DimensionMismatch(f"image is {image.width}x{image.height}, segment expects {w}x{h}")
    data = image.data if image is not None and b.track_values else None
    byte_cells, elems = gadgets.pixel_entry(b, data, n_bytes=w * h * 3)
    if hash_in:
        b.expose(hash_gadget(b, elems))
    grid = byte_cells.reshape(h, w, 3)
    for t in transforms:
        grid = synthesize(b, t, grid)
    if hash_out:
        out_elems = gadgets.pack_image_cells(b, grid)
        b.expose(hash_gadget(b, out_elems))
    return grid


@lru_cache(maxsize=4096)
def _cost_cached(texts: tuple[str, ...], in_dims, hash_in, hash_out, column_budget, blinding_rows, calibration):
    transforms = [parse_transform(t) for t in texts]
    b = CircuitBuilder(blinding_rows=blinding_rows, track_values=False, column_budget=column_budget)
    synthesize_segment(b, transforms, in_dims, None, hash_in, hash_out)
    return cost_of_layout(b.finalize(), calibration)


def estimate_cost(transforms, in_dims, hash_in: bool = True, hash_out: bool = True,
                  column_budget: int = gadgets.DEFAULT_BUDGET, blinding_rows: int = 6,
                  calibration: int = CALIBRATION) -> CostEstimate:
    """Cost of the segment circuit, from a layout-only synthesis (no witness)."""
    texts = tuple(t.text() for t in transforms)
    return _cost_cached(texts, tuple(in_dims), hash_in, hash_out, column_budget, blinding_rows, calibration)


# -- planning ------------------------------------------------------------------


@dataclass
class Segment:
    index: int
    transforms: tuple[TransformSpec, ...]
    in_dims: tuple[int, int]
    out_dims: tuple[int, int]
    cost: CostEstimate
    hash_in: bool = True
    hash_out: bool = True

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "transforms": [t.text() for t in self.transforms],
            "in_dims": list(self.in_dims),
            "out_dims": list(self.out_dims),
            "cost": self.cost.to_dict(),
        }


def plan_segments(p: PipelineSpec, limit: int, blinding_rows: int = 6,
                  column_budget: int = gadgets.DEFAULT_BUDGET) -> list[Segment]:
    """Greedy left-to-right packing under ``limit`` bytes of estimated memory."""
    if limit <= 0:
        raise InfeasibleLimit("memory limit must be positive")
    dims = p.dims()
    ts = p.transforms

    def cost(i, j):
        return estimate_cost(ts[i:j], dims[i], column_budget=column_budget, blinding_rows=blinding_rows)

    segments = []
    i = 0
    while i < len(ts):
        c = cost(i, i + 1)
        if c.estimated_peak_memory > limit:
            raise InfeasibleLimit(
                f"transform {i + 1} ({ts[i].text()}) alone needs ~{c.estimated_peak_memory} bytes, "
                f"over the {limit}-byte limit"
            )
        j = i + 1
        while j < len(ts):
            nxt = cost(i, j + 1)
            if nxt.estimated_peak_memory > limit:
                break
            c = nxt
            j += 1
        segments.append(Segment(len(segments), tuple(ts[i:j]), dims[i], dims[j], c))
        i = j
    return segments


# -- proving ---------------------------------------------------------------------


@dataclass
class BuiltSegment:
    layout: CircuitLayout
    witness: WitnessGrid
    instance: list[int]
    output: Image


def build_segment(s: Segment, image: Image, blinding_rows: int = 6,
                  column_budget: int = gadgets.DEFAULT_BUDGET) -> BuiltSegment:
    b = CircuitBuilder(blinding_rows=blinding_rows, column_budget=column_budget)
    grid = synthesize_segment(b, s.transforms, s.in_dims, image, s.hash_in, s.hash_out)
    layout = b.finalize()
    witness = b.witness(layout)
    expected = image
    for t in s.transforms:
        expected = apply_native(t, expected)
    if grid.values is None or not np.array_equal(np.asarray(grid.values, dtype=np.int64), expected.data):
        raise ConstraintFailure(f"segment {s.index}: circuit output disagrees with the native transform")
    return BuiltSegment(layout, witness, b.instance(), expected)


def _binding(layout_bytes: bytes, instance, report: SatisfactionReport, transforms) -> bytes:
    h = hashlib.sha256()
    h.update(b"imgattest-segment-v1")
    h.update(len(layout_bytes).to_bytes(8, "little") + layout_bytes)
    h.update(len(instance).to_bytes(4, "little"))
    for v in instance:
        h.update(encode(int(v)))
    h.update(_canon_json({"report": report.to_dict(), "transforms": list(transforms)}))
    return h.digest()


def _canon_json(obj) -> bytes:
    import json

    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


@dataclass
class SegmentRecord:
    transforms: tuple[str, ...]
    in_dims: tuple[int, int]
    out_dims: tuple[int, int]
    layout_bytes: bytes
    instance: list[int]
    report: SatisfactionReport
    binding: bytes
    _layout: CircuitLayout | None = field(default=None, repr=False, compare=False)

    @property
    def h_in(self) -> int:
        return self.instance[0]

    @property
    def h_out(self) -> int:
        return self.instance[-1]

    def layout(self) -> CircuitLayout:
        if self._layout is None:
            self._layout = CircuitLayout.from_bytes(self.layout_bytes)
        return self._layout

    def expected_binding(self) -> bytes:
        return _binding(self.layout_bytes, self.instance, self.report, self.transforms)


@dataclass
class ChainBundle:
    source_digest: int
    segments: list[SegmentRecord]
    final_image: Image | None = None

    def to_bytes(self) -> bytes:
        from .bundle import bundle_to_bytes

        return bundle_to_bytes(self)

    @classmethod
    def from_bytes(cls, data: bytes) -> ChainBundle:
        from .bundle import bundle_from_bytes

        return bundle_from_bytes(data)

    def to_json(self) -> str:
        from .bundle import bundle_to_json

        return bundle_to_json(self)


def default_threads() -> int:
    env = os.environ.get("ZKIMG_THREADS")
    if env:
        try:
            n = int(env)
            if n > 0:
                return n
        except ValueError:
            pass
    return os.cpu_count() or 1


def prove_segment(s: Segment, image: Image, blinding_rows: int = 6,
                  column_budget: int = gadgets.DEFAULT_BUDGET) -> tuple[SegmentRecord, Image]:
    built = build_segment(s, image, blinding_rows, column_budget)
    report = check_constraints(built.layout, built.witness, built.instance)
    if not report.satisfied:
        raise ConstraintFailure(f"segment {s.index} is unsatisfied on honest input: {report.summary()}")
    del built.witness
    lb = built.layout.to_bytes()
    texts = tuple(t.text() for t in s.transforms)
    rec = SegmentRecord(texts, s.in_dims, s.out_dims, lb, list(built.instance), report,
                        _binding(lb, built.instance, report, texts))
    return rec, built.output


def run_pipeline(img: Image, p: PipelineSpec, limit: int = DEFAULT_MEM_LIMIT, blinding_rows: int = 6,
                 threads: int | None = None, on_segment=None) -> ChainBundle:
    """Plan, build and check every segment; returns the publishable bundle.

    Native evaluation runs first so that, with ``threads > 1``, segment
    circuits can be built and checked concurrently.
    """
    if img.dims != p.source:
        raise DimensionMismatch(f"image is {img.width}x{img.height}, pipeline expects {p.source[0]}x{p.source[1]}")
    segments = plan_segments(p, limit, blinding_rows)
    inputs = [img]
    for s in segments:
        cur = inputs[-1]
        for t in s.transforms:
            cur = apply_native(t, cur)
        inputs.append(cur)
    threads = threads or 1

    def work(i):
        rec, _ = prove_segment(segments[i], inputs[i], blinding_rows)
        if on_segment is not None:
            on_segment(segments[i], rec)
        return rec

    if threads > 1 and len(segments) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(work, range(len(segments))))
    else:
        records = [work(i) for i in range(len(segments))]
    final = inputs[-1] if p.reveal == "image" else None
    return ChainBundle(hash_image(img), records, final)


# -- verification ----------------------------------------------------------------


def verify_chain(b: ChainBundle) -> SatisfactionReport:
    """Accept iff every segment is satisfied and bound, digests link, the root
    matches, and any revealed image hashes to the last output digest."""
    out: list[Violation] = []

    def reject(check: str, detail: str, **loc):
        out.append(Violation("instance", {"check": check, **loc}, detail))

    if not b.segments:
        reject("structure", "bundle has no segments")
        return SatisfactionReport(out)
    for i, rec in enumerate(b.segments):
        if not rec.report.satisfied:
            for v in rec.report.violations:
                out.append(Violation(v.kind, {"segment": i, **v.location}, f"segment {i}: {v.detail}"))
        if len(rec.instance) != 2 or any(not 0 <= int(v) < P for v in rec.instance):
            reject("proof", f"segment {i}: malformed instance vector", segment=i)
            continue
        if rec.binding != rec.expected_binding():
            reject("proof", f"segment {i}: layout/instance/report do not match the segment binding", segment=i)
            continue
        try:
            layout = rec.layout()
        except Exception as e:  # any decoding failure rejects this segment
            reject("proof", f"segment {i}: layout does not decode ({e})", segment=i)
            continue
        if len(layout.instance_slots) != len(rec.instance):
            reject("proof", f"segment {i}: instance count disagrees with the layout", segment=i)
    for i in range(len(b.segments) - 1):
        a, c = b.segments[i], b.segments[i + 1]
        if a.h_out != c.h_in:
            reject("linkage", f"segment {i} output digest does not match segment {i + 1} input digest",
                   segment=i + 1)
        if tuple(a.out_dims) != tuple(c.in_dims):
            reject("linkage", f"segment {i} output size does not match segment {i + 1} input size",
                   segment=i + 1)
    if b.segments[0].h_in != b.source_digest:
        reject("source", "first input digest differs from the claimed source digest", segment=0)
    if b.final_image is not None:
        last = b.segments[-1]
        if b.final_image.dims != tuple(last.out_dims):
            reject("final", "revealed image size differs from the last segment output", segment=len(b.segments) - 1)
        elif hash_image(b.final_image) != last.h_out:
            reject("final", "revealed image does not hash to the last output digest",
                   segment=len(b.segments) - 1)
    return SatisfactionReport(out)
