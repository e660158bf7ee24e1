"""RGB rasters and bit-exact binary PPM (P6, maxval 255) I/O."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass

import numpy as np

from .errors import MalformedHeader, PpmError, TrailingData, TruncatedPayload, UnsupportedMaxval


@dataclass(eq=False)
class Image:
    """Height x width x 3 array of sub-pixels, row-major, channel-interleaved."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected an (H, W, 3) array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("sub-pixels must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        self.data = np.ascontiguousarray(arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def dims(self) -> tuple[int, int]:
        return self.width, self.height

    def __eq__(self, other):
        return isinstance(other, Image) and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"Image({self.width}x{self.height})"

    @classmethod
    def zeros(cls, width: int, height: int) -> Image:
        return cls(np.zeros((height, width, 3), dtype=np.uint8))

    @classmethod
    def random(cls, width: int, height: int, rng: np.random.Generator | int | None = None) -> Image:
        rng = np.random.default_rng(rng)
        return cls(rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8))

    def tobytes(self) -> bytes:
        return self.data.tobytes()


# P6 header: magic, then width, height, maxval separated by whitespace (with
# optional comments), then exactly one whitespace byte before the raster.
_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\d+)")


def load_ppm(data: bytes) -> Image:
    if not data.startswith(b"P6"):
        raise MalformedHeader("not a binary PPM (missing P6 magic)")
    pos = 2
    fields = []
    for _ in range(3):
        m = _TOKEN.match(data, pos)
        if not m or m.start(1) == pos and pos == 2:
            raise MalformedHeader("malformed PPM header")
        fields.append(int(m.group(1)))
        pos = m.end()
    if pos >= len(data) or data[pos : pos + 1] not in (b" ", b"\n", b"\r", b"\t"):
        raise MalformedHeader("header must end with a single whitespace byte")
    pos += 1
    w, h, maxval = fields
    if w <= 0 or h <= 0:
        raise MalformedHeader(f"invalid dimensions {w}x{h}")
    if maxval != 255:
        raise UnsupportedMaxval(f"only maxval 255 is supported, got {maxval}")
    need = w * h * 3
    payload = data[pos:]
    if len(payload) < need:
        raise TruncatedPayload(f"expected {need} payload bytes, got {len(payload)}")
    if len(payload) > need:
        raise TrailingData(f"{len(payload) - need} bytes after the raster")
    return Image(np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3).copy())


def save_ppm(img: Image) -> bytes:
    return f"P6\n{img.width} {img.height}\n255\n".encode("ascii") + img.tobytes()


def read_image(path: str | os.PathLike) -> Image:
    """Load a PPM, or any format Pillow understands when it is installed."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data.startswith(b"P6"):
        return load_ppm(data)
    try:
        from PIL import Image as PILImage
    except ImportError:
        raise PpmError(f"{os.fspath(path)!r} is not a P6 PPM and Pillow is unavailable") from None
    import io

    try:
        with PILImage.open(io.BytesIO(data)) as im:
            return Image(np.asarray(im.convert("RGB"), dtype=np.uint8))
    except OSError as e:
        raise PpmError(f"cannot decode {os.fspath(path)!r}: {e}") from e


def write_image(path: str | os.PathLike, img: Image) -> None:
    with open(path, "wb") as fh:
        fh.write(save_ppm(img))
