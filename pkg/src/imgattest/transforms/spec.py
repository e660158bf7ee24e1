"""Transform descriptions, parameter validation and their one-line text form."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any

from ..errors import InvalidParams


class Kind(str, enum.Enum):
    CROP = "crop"
    ROTATE = "rotate"
    FLIP = "flip"
    TRANSLATE = "translate"
    RESIZE = "resize"
    CENSOR = "censor"
    RGB2YCBCR = "rgb2ycbcr"
    YCBCR2RGB = "ycbcr2rgb"
    WHITEBALANCE = "whitebalance"
    CONTRAST = "contrast"
    SHARPEN = "sharpen"
    BLUR = "blur"


GEOMETRIC = frozenset({Kind.CROP, Kind.ROTATE, Kind.FLIP, Kind.TRANSLATE, Kind.RESIZE, Kind.CENSOR})
POINTWISE = frozenset({Kind.CONTRAST, Kind.WHITEBALANCE})
COLORSPACE = frozenset({Kind.RGB2YCBCR, Kind.YCBCR2RGB})
CONVOLUTION = frozenset({Kind.SHARPEN, Kind.BLUR})

# key -> type, per kind (censor regions are parsed separately)
_KEYS: dict[Kind, dict[str, type]] = {
    Kind.CROP: {"x": int, "y": int, "w": int, "h": int},
    Kind.ROTATE: {"deg": int},
    Kind.FLIP: {"axis": str},
    Kind.TRANSLATE: {"dx": int, "dy": int},
    Kind.RESIZE: {"w": int, "h": int},
    Kind.CENSOR: {},
    Kind.RGB2YCBCR: {},
    Kind.YCBCR2RGB: {},
    Kind.WHITEBALANCE: {"r": float, "g": float, "b": float},
    Kind.CONTRAST: {"f": float},
    Kind.SHARPEN: {},
    Kind.BLUR: {},
}

_REGION_KEYS = {"rect": ("x", "y", "w", "h"), "oval": ("cx", "cy", "rx", "ry")}


@dataclass(frozen=True)
class Region:
    shape: str  # "rect" or "oval"
    a: int
    b: int
    c: int
    d: int

    def text(self) -> str:
        keys = _REGION_KEYS[self.shape]
        return self.shape + " " + " ".join(f"{k}={v}" for k, v in zip(keys, (self.a, self.b, self.c, self.d)))


@dataclass(frozen=True)
class TransformSpec:
    kind: Kind
    params: tuple[tuple[str, Any], ...] = ()
    regions: tuple[Region, ...] = field(default=())

    @classmethod
    def make(cls, kind: Kind | str, regions=(), **params) -> TransformSpec:
        kind = Kind(kind)
        keys = _KEYS[kind]
        unknown = set(params) - set(keys)
        if unknown:
            raise InvalidParams(f"{kind.value}: unknown parameter(s) {sorted(unknown)}")
        missing = set(keys) - set(params)
        if missing:
            raise InvalidParams(f"{kind.value}: missing parameter(s) {sorted(missing)}")
        vals = []
        for k, typ in keys.items():
            v = params[k]
            if typ is int:
                if isinstance(v, float) and not v.is_integer():
                    raise InvalidParams(f"{kind.value}: {k} must be an integer")
                try:
                    v = int(v)
                except (TypeError, ValueError):
                    raise InvalidParams(f"{kind.value}: {k} must be an integer, got {v!r}") from None
            elif typ is float:
                try:
                    v = float(v)
                except (TypeError, ValueError):
                    raise InvalidParams(f"{kind.value}: {k} must be a number, got {v!r}") from None
                if not math.isfinite(v):
                    raise InvalidParams(f"{kind.value}: {k} must be finite")
            else:
                v = str(v)
            vals.append((k, v))
        regions = tuple(regions)
        if kind is Kind.CENSOR and not regions:
            raise InvalidParams("censor needs at least one region")
        if kind is not Kind.CENSOR and regions:
            raise InvalidParams(f"{kind.value} takes no regions")
        spec = cls(kind, tuple(vals), regions)
        spec._validate_static()
        return spec

    def __getitem__(self, key: str):
        for k, v in self.params:
            if k == key:
                return v
        raise KeyError(key)

    def _validate_static(self):
        k = self.kind
        if k is Kind.ROTATE and self["deg"] % 360 not in (90, 180, 270):
            raise InvalidParams(f"rotation must be 90, 180 or 270 degrees, got {self['deg']}")
        if k is Kind.FLIP and self["axis"] not in ("x", "y"):
            raise InvalidParams(f"flip axis must be x or y, got {self['axis']!r}")
        if k in (Kind.CROP, Kind.RESIZE) and (self["w"] <= 0 or self["h"] <= 0):
            raise InvalidParams(f"{k.value}: target size must be positive")
        for r in self.regions:
            if r.shape not in _REGION_KEYS:
                raise InvalidParams(f"unknown censor shape {r.shape!r}")
            if r.c <= 0 or r.d <= 0:
                raise InvalidParams(f"censor {r.shape}: extent must be positive")

    def output_dims(self, dims: tuple[int, int]) -> tuple[int, int]:
        """Validate against input ``(width, height)`` and return the output size."""
        w, h = dims
        k = self.kind
        if k is Kind.CROP:
            x, y, cw, ch = self["x"], self["y"], self["w"], self["h"]
            if x < 0 or y < 0 or x + cw > w or y + ch > h:
                raise InvalidParams(f"crop {cw}x{ch}+{x}+{y} exceeds the {w}x{h} image")
            return cw, ch
        if k is Kind.ROTATE:
            return (h, w) if self["deg"] % 180 else (w, h)
        if k is Kind.RESIZE:
            return self["w"], self["h"]
        if k is Kind.CENSOR:
            for r in self.regions:
                if r.shape == "rect" and (r.a < 0 or r.b < 0 or r.a + r.c > w or r.b + r.d > h):
                    raise InvalidParams(f"censor rectangle {r.text()!r} exceeds the {w}x{h} image")
        return w, h

    def text(self) -> str:
        parts = [self.kind.value]
        for k, v in self.params:
            parts.append(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}")
        parts.extend(r.text() for r in self.regions)
        return " ".join(parts)

    def __str__(self):
        return self.text()


def crop(x, y, w, h) -> TransformSpec:
    return TransformSpec.make(Kind.CROP, x=x, y=y, w=w, h=h)


def rotate(deg) -> TransformSpec:
    return TransformSpec.make(Kind.ROTATE, deg=deg)


def flip(axis) -> TransformSpec:
    return TransformSpec.make(Kind.FLIP, axis=axis)


def translate(dx, dy) -> TransformSpec:
    return TransformSpec.make(Kind.TRANSLATE, dx=dx, dy=dy)


def resize(w, h) -> TransformSpec:
    return TransformSpec.make(Kind.RESIZE, w=w, h=h)


def censor(*regions: Region) -> TransformSpec:
    return TransformSpec.make(Kind.CENSOR, regions=regions)


def rect(x, y, w, h) -> Region:
    return Region("rect", int(x), int(y), int(w), int(h))


def oval(cx, cy, rx, ry) -> Region:
    return Region("oval", int(cx), int(cy), int(rx), int(ry))


def rgb2ycbcr() -> TransformSpec:
    return TransformSpec.make(Kind.RGB2YCBCR)


def ycbcr2rgb() -> TransformSpec:
    return TransformSpec.make(Kind.YCBCR2RGB)


def whitebalance(r, g, b) -> TransformSpec:
    return TransformSpec.make(Kind.WHITEBALANCE, r=r, g=g, b=b)


def contrast(f) -> TransformSpec:
    return TransformSpec.make(Kind.CONTRAST, f=f)


def sharpen() -> TransformSpec:
    return TransformSpec.make(Kind.SHARPEN)


def blur() -> TransformSpec:
    return TransformSpec.make(Kind.BLUR)
