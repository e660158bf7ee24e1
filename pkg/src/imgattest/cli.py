"""Command-line entry point: plan, prove, verify, hash, apply, bench.

Exit codes: 0 ok, 1 verification rejected, 2 input error, 3 infeasible plan,
4 internal inconsistency.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import resource
import sys
import time

from . import _kernels
from .errors import ConstraintFailure, DimensionMismatch, ImgAttestError, InfeasibleLimit
from .image import read_image, write_image
from .pipeline import (
    DEFAULT_MEM_LIMIT,
    ChainBundle,
    PipelineSpec,
    Segment,
    build_segment,
    cost_of_layout,
    default_threads,
    parse_pipeline,
    parse_transform,
    plan_segments,
    run_pipeline,
    verify_chain,
)
from .plonkish.check import check_constraints
from .plonkish.circuit import CircuitBuilder
from .poseidon import digest_hex, hash_image
from .transforms.native import apply_all
from .transforms.spec import Kind

EXIT_OK, EXIT_REJECTED, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 1, 2, 3, 4

log = logging.getLogger("imgattest")

_UNITS = {"": 1, "b": 1, "k": 1 << 10, "kb": 1000, "kib": 1 << 10, "m": 1 << 20, "mb": 1000**2,
          "mib": 1 << 20, "g": 1 << 30, "gb": 1000**3, "gib": 1 << 30, "t": 1 << 40, "tb": 1000**4,
          "tib": 1 << 40}


def parse_size(text: str) -> int:
    m = re.fullmatch(r"\s*(\d+(?:\.\d+)?)\s*([A-Za-z]*)\s*", text)
    if not m or m.group(2).lower() not in _UNITS:
        raise argparse.ArgumentTypeError(f"invalid size {text!r} (e.g. 512MiB, 8GiB, 1000000)")
    n = int(float(m.group(1)) * _UNITS[m.group(2).lower()])
    if n <= 0:
        raise argparse.ArgumentTypeError("size must be positive")
    return n


def positive_int(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if n <= 0:
        raise argparse.ArgumentTypeError("value must be positive")
    return n


def _read_pipeline(path: str) -> PipelineSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_pipeline(fh.read())


def _out(line: str = ""):
    sys.stdout.write(line + "\n")


# -- commands ------------------------------------------------------------------


def cmd_plan(args) -> int:
    p = _read_pipeline(args.pipeline)
    segs = plan_segments(p, args.mem_limit, args.blinding_rows)
    doc = {
        "source": list(p.source),
        "reveal": p.reveal,
        "mem_limit": args.mem_limit,
        "segments": [s.to_dict() for s in segs],
    }
    _out(json.dumps(doc, sort_keys=True))
    return EXIT_OK


def cmd_prove(args) -> int:
    p = _read_pipeline(args.pipeline)
    img = read_image(args.image)

    def report(seg: Segment, rec):
        c = seg.cost
        _out(f"segment {seg.index}: {len(seg.transforms)} transform(s), rows {c.useful_rows}/{c.padded_rows}, "
             f"columns {c.total_columns}, h_in {digest_hex(rec.h_in)}, h_out {digest_hex(rec.h_out)}")

    t0 = time.perf_counter()
    bundle = run_pipeline(img, p, args.mem_limit, args.blinding_rows, args.threads, on_segment=report)
    data = bundle.to_bytes()
    with open(args.out, "wb") as fh:
        fh.write(data)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(bundle.to_json() + "\n")
    peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024
    _out(f"source {digest_hex(bundle.source_digest)}")
    _out(f"wrote {args.out} ({len(data)} bytes, {len(bundle.segments)} segment(s)) "
         f"in {time.perf_counter() - t0:.2f}s, peak rss {peak} bytes")
    return EXIT_OK


def cmd_verify(args) -> int:
    with open(args.bundle, "rb") as fh:
        bundle = ChainBundle.from_bytes(fh.read())
    rep = verify_chain(bundle)
    if args.source_digest is not None:
        try:
            want = int(args.source_digest, 16)
        except ValueError:
            sys.stderr.write(f"error: --source-digest is not hex: {args.source_digest!r}\n")
            return EXIT_INPUT
        if want != bundle.source_digest:
            _out("REJECTED: source digest differs from the expected value")
            return EXIT_REJECTED
    if rep.satisfied:
        _out(f"OK: {len(bundle.segments)} segment(s), source {digest_hex(bundle.source_digest)}, "
             f"final {digest_hex(bundle.segments[-1].h_out)}")
        return EXIT_OK
    for v in rep.violations[:20]:
        where = f" (segment {v.location['segment']})" if "segment" in v.location else ""
        _out(f"REJECTED: {v.detail}{where}")
    return EXIT_REJECTED


def cmd_hash(args) -> int:
    _out(digest_hex(hash_image(read_image(args.image))))
    return EXIT_OK


def cmd_apply(args) -> int:
    p = _read_pipeline(args.pipeline)
    img = read_image(args.image)
    if img.dims != p.source:
        raise DimensionMismatch(f"image is {img.width}x{img.height}, pipeline expects {p.source[0]}x{p.source[1]}")
    write_image(args.out, apply_all(p.transforms, img))
    return EXIT_OK


BENCH_COLUMNS = (
    "transform", "width", "height", "hash", "backend", "useful_rows", "padded_rows", "advice_columns",
    "fixed_columns", "total_columns", "estimated_cells", "gates", "gates_transform", "gates_hash",
    "gates_pack", "lookups", "hash_rows", "transform_rows", "pack_rows", "witness_s", "check_s",
    "satisfied", "estimated_peak_bytes", "peak_rss_bytes",
)


def default_bench_spec(name: str, w: int, h: int, params: str | None):
    kind = Kind(name)
    if params:
        return parse_transform(f"{name} {params}")
    defaults = {
        Kind.CROP: f"x={w // 4} y={h // 4} w={max(1, w // 2)} h={max(1, h // 2)}",
        Kind.ROTATE: "deg=90",
        Kind.FLIP: "axis=x",
        Kind.TRANSLATE: f"dx={w // 8} dy={h // 8}",
        Kind.RESIZE: f"w={max(1, w // 2)} h={max(1, h // 2)}",
        Kind.CENSOR: f"rect x={w // 4} y={h // 4} w={max(1, w // 2)} h={max(1, h // 2)}",
        Kind.CONTRAST: "f=2.0",
        Kind.WHITEBALANCE: "r=1.1 g=1.0 b=0.9",
    }
    return parse_transform(f"{name} {defaults.get(kind, '')}")


def cmd_bench(args) -> int:
    from .image import Image

    m = re.fullmatch(r"(\d+)x(\d+)", args.size)
    if not m or 0 in (int(m.group(1)), int(m.group(2))):
        raise ImgAttestError(f"size must be WxH, got {args.size!r}")
    w, h = int(m.group(1)), int(m.group(2))
    try:
        spec = default_bench_spec(args.transform, w, h, args.params)
    except ValueError:
        raise ImgAttestError(f"unknown transform {args.transform!r}") from None
    out_dims = spec.output_dims((w, h))
    seg = Segment(0, (spec,), (w, h), out_dims, cost=None, hash_in=args.hash != "none",
                  hash_out=args.hash == "both")
    img = Image.random(w, h, args.seed)
    t0 = time.perf_counter()
    if args.dry:
        b = CircuitBuilder(blinding_rows=args.blinding_rows, track_values=False)
        from .pipeline import synthesize_segment

        synthesize_segment(b, seg.transforms, seg.in_dims, None, seg.hash_in, seg.hash_out)
        layout = b.finalize()
        t_wit, t_chk, ok = time.perf_counter() - t0, 0.0, ""
    else:
        built = build_segment(seg, img, args.blinding_rows)
        layout = built.layout
        t_wit = time.perf_counter() - t0
        t1 = time.perf_counter()
        rep = check_constraints(layout, built.witness, built.instance)
        t_chk = time.perf_counter() - t1
        ok = str(rep.satisfied).lower()
        if not rep.satisfied:
            raise ConstraintFailure(rep.summary())
    c = cost_of_layout(layout)
    cats = layout.stats()["gates_by_category"]
    row = {
        "transform": spec.kind.value, "width": w, "height": h, "hash": args.hash, "backend": _kernels.backend(),
        "useful_rows": c.useful_rows, "padded_rows": c.padded_rows, "advice_columns": c.advice_columns,
        "fixed_columns": c.fixed_columns, "total_columns": c.total_columns,
        "estimated_cells": c.estimated_cells, "gates": c.gate_count,
        "gates_transform": cats.get("transform", 0), "gates_hash": cats.get("hash", 0),
        "gates_pack": cats.get("pack", 0), "lookups": c.lookup_count, "hash_rows": c.hash_rows,
        "transform_rows": c.transform_rows, "pack_rows": c.pack_rows, "witness_s": f"{t_wit:.4f}",
        "check_s": f"{t_chk:.4f}", "satisfied": ok, "estimated_peak_bytes": c.estimated_peak_memory,
        "peak_rss_bytes": resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024,
    }
    _out(",".join(BENCH_COLUMNS))
    _out(",".join(str(row[k]) for k in BENCH_COLUMNS))
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="imgattest", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mem-limit", type=parse_size, default=DEFAULT_MEM_LIMIT,
                        help="estimated-memory budget per segment (default 8GiB)")
    common.add_argument("--blinding-rows", type=positive_int, default=6, help="lookup blinding rows t")
    common.add_argument("--threads", type=positive_int, default=None,
                        help="worker threads (default: $ZKIMG_THREADS or all cores)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", parents=[common], help="split a pipeline into segments and print costs")
    p.add_argument("pipeline")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("prove", parents=[common], help="build and check every segment, write a bundle")
    p.add_argument("pipeline")
    p.add_argument("image")
    p.add_argument("-o", "--out", required=True, help="bundle output path")
    p.add_argument("--json", help="also write a JSON debug dump here")
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("verify", parents=[common], help="verify a chain bundle")
    p.add_argument("bundle")
    p.add_argument("--source-digest", help="expected source digest (hex)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("hash", parents=[common], help="print the Poseidon digest of an image")
    p.add_argument("image")
    p.set_defaults(func=cmd_hash)

    p = sub.add_parser("apply", parents=[common], help="apply a pipeline natively (no circuit)")
    p.add_argument("pipeline")
    p.add_argument("image")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("bench", parents=[common], help="time and count constraints for one transform")
    p.add_argument("transform")
    p.add_argument("size", help="WxH")
    p.add_argument("--params", help="transform parameters, e.g. 'f=1.5'")
    p.add_argument("--hash", choices=("none", "input", "both"), default="both")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dry", action="store_true", help="layout only: no witness, no check")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    try:
        sys.stdout.reconfigure(line_buffering=True)
    except (AttributeError, ValueError):
        pass
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.threads is None:
        args.threads = default_threads()
    try:
        return args.func(args)
    except InfeasibleLimit as e:
        sys.stderr.write(f"infeasible: {e}\n")
        return EXIT_INFEASIBLE
    except ConstraintFailure as e:
        sys.stderr.write(f"internal error: {e}\n")
        return EXIT_INTERNAL
    except (ImgAttestError, OSError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_INPUT
    except Exception as e:  # noqa: BLE001 - last-resort contract: exit 4
        log.exception("unexpected failure")
        sys.stderr.write(f"internal error: {type(e).__name__}: {e}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
