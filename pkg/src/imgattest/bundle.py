"""ChainBundle container: versioned binary (``ZIMG``) and a JSON debug dump.

Binary layout (little-endian)::

    b"ZIMG" | u16 version | u8 flags (bit 0: final image present)
    32-byte source digest
    u32 segment count, then per segment:
        u32 len | JSON (transforms, dims, report)
        u64 len | serialized circuit layout
        u32 n   | n x 32-byte instance values
        32-byte binding
    [u32 width | u32 height | width*height*3 sub-pixels]

Digests and instance values use the canonical 32-byte field encoding.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import BundleFormatError, NonCanonicalEncoding
from .field import BYTES, decode, encode
from .image import Image
from .pipeline import ChainBundle, SegmentRecord
from .plonkish.check import SatisfactionReport
from .poseidon import digest_hex

MAGIC = b"ZIMG"
VERSION = 1
_HAS_IMAGE = 1


def bundle_to_bytes(b: ChainBundle) -> bytes:
    parts = [MAGIC, struct.pack("<HB", VERSION, _HAS_IMAGE if b.final_image is not None else 0)]
    parts.append(encode(b.source_digest))
    parts.append(struct.pack("<I", len(b.segments)))
    for rec in b.segments:
        meta = json.dumps(
            {
                "transforms": list(rec.transforms),
                "in_dims": list(rec.in_dims),
                "out_dims": list(rec.out_dims),
                "report": rec.report.to_dict(),
            },
            sort_keys=True,
            separators=(",", ":"),
        ).encode()
        parts += [struct.pack("<I", len(meta)), meta]
        parts += [struct.pack("<Q", len(rec.layout_bytes)), rec.layout_bytes]
        parts.append(struct.pack("<I", len(rec.instance)))
        parts += [encode(int(v)) for v in rec.instance]
        if len(rec.binding) != 32:
            raise BundleFormatError("segment binding must be 32 bytes")
        parts.append(rec.binding)
    if b.final_image is not None:
        img = b.final_image
        parts += [struct.pack("<II", img.width, img.height), img.tobytes()]
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise BundleFormatError("truncated bundle")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def field(self) -> int:
        try:
            return decode(self.take(BYTES))
        except NonCanonicalEncoding as e:
            raise BundleFormatError(f"non-canonical field element: {e}") from e


def bundle_from_bytes(data: bytes) -> ChainBundle:
    r = _Reader(bytes(data))
    if r.take(4) != MAGIC:
        raise BundleFormatError("not a chain bundle (bad magic)")
    version, flags = r.unpack("<HB")
    if version != VERSION:
        raise BundleFormatError(f"unsupported bundle version {version}")
    if flags & ~_HAS_IMAGE:
        raise BundleFormatError(f"unknown flags {flags:#x}")
    source = r.field()
    (nseg,) = r.unpack("<I")
    segments = []
    for _ in range(nseg):
        (mlen,) = r.unpack("<I")
        try:
            meta = json.loads(r.take(mlen))
            report = SatisfactionReport.from_dict(meta["report"])
            transforms = tuple(str(t) for t in meta["transforms"])
            in_dims = tuple(int(x) for x in meta["in_dims"])
            out_dims = tuple(int(x) for x in meta["out_dims"])
        except (ValueError, KeyError, TypeError) as e:
            raise BundleFormatError(f"bad segment metadata: {e}") from e
        (llen,) = r.unpack("<Q")
        layout = r.take(llen)
        (ninst,) = r.unpack("<I")
        instance = [r.field() for _ in range(ninst)]
        binding = r.take(32)
        segments.append(SegmentRecord(transforms, in_dims, out_dims, layout, instance, report, binding))
    image = None
    if flags & _HAS_IMAGE:
        w, h = r.unpack("<II")
        if w == 0 or h == 0:
            raise BundleFormatError("empty final image")
        raw = r.take(w * h * 3)
        image = Image(np.frombuffer(raw, dtype=np.uint8).reshape(h, w, 3).copy())
    if r.pos != len(r.data):
        raise BundleFormatError(f"{len(r.data) - r.pos} trailing bytes")
    if not segments:
        raise BundleFormatError("bundle has no segments")
    return ChainBundle(source, segments, image)


def bundle_to_json(b: ChainBundle) -> str:
    segs = []
    for i, rec in enumerate(b.segments):
        entry = {
            "index": i,
            "transforms": list(rec.transforms),
            "in_dims": list(rec.in_dims),
            "out_dims": list(rec.out_dims),
            "h_in": digest_hex(rec.h_in),
            "h_out": digest_hex(rec.h_out),
            "instance": [digest_hex(v) for v in rec.instance],
            "layout_bytes": len(rec.layout_bytes),
            "binding": rec.binding.hex(),
            "report": rec.report.to_dict(),
        }
        try:
            entry["layout"] = rec.layout().stats()
        except Exception as e:  # debug output only
            entry["layout_error"] = str(e)
        segs.append(entry)
    doc = {
        "format": "ZIMG",
        "version": VERSION,
        "source_digest": digest_hex(b.source_digest),
        "segments": segs,
        "final_image": None if b.final_image is None else {"width": b.final_image.width,
                                                            "height": b.final_image.height},
    }
    return json.dumps(doc, indent=2, sort_keys=True)
