"""Reference (out-of-circuit) semantics of every transform.

Geometric transforms are written as pure index remaps over an arbitrary
(H, W, 3) array so that circuit synthesis can replay them on cell keys.
"""

from __future__ import annotations

import numpy as np

from .. import _kernels
from ..image import Image
from .spec import Kind, Region, TransformSpec

SCALE_BITS = 15
SCALE = 1 << SCALE_BITS

RGB2YCBCR_COEFFS = (
    (0.299, 0.587, 0.114),
    (-0.168736, -0.331264, 0.5),
    (0.5, -0.418688, -0.081312),
)
RGB2YCBCR_BASE = (0, 128, 128)
# inverse applied to (Y, Cb - 128, Cr - 128)
YCBCR2RGB_COEFFS = (
    (1.0, 0.0, 1.402),
    (1.0, -0.344136, -0.714136),
    (1.0, 1.772, 0.0),
)

BLUR_KERNEL = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]], dtype=np.int64)
BLUR_DIV = 16
SHARPEN_KERNEL = np.array([[0, -1, 0], [-1, 5, -1], [0, -1, 0]], dtype=np.int64)
SHARPEN_DIV = 1


def fixed_point_matrix(kind: Kind) -> tuple[np.ndarray, np.ndarray]:
    """Integer coefficients ``K`` and offsets (rounding bias included) at scale 2**15."""
    if kind is Kind.RGB2YCBCR:
        K = np.array([[round(c * SCALE) for c in row] for row in RGB2YCBCR_COEFFS], dtype=np.int64)
        off = np.array([base * SCALE + SCALE // 2 for base in RGB2YCBCR_BASE], dtype=np.int64)
    elif kind is Kind.YCBCR2RGB:
        K = np.array([[round(c * SCALE) for c in row] for row in YCBCR2RGB_COEFFS], dtype=np.int64)
        off = -128 * (K[:, 1] + K[:, 2]) + SCALE // 2
    else:
        raise ValueError(f"{kind} is not a colorspace transform")
    return K, off


def quotient_bounds(K: np.ndarray, off: np.ndarray) -> tuple[int, int]:
    """Smallest/largest ``floor((K·p + off) / S)`` over all 8-bit inputs, all rows."""
    lo = (np.minimum(K, 0).sum(axis=1) * 255 + off) >> SCALE_BITS
    hi = (np.maximum(K, 0).sum(axis=1) * 255 + off) >> SCALE_BITS
    return int(lo.min()), int(hi.max())


def conv_kernel(kind: Kind) -> tuple[np.ndarray, int, int]:
    """``(kernel, divisor, bias)``."""
    if kind is Kind.BLUR:
        return BLUR_KERNEL, BLUR_DIV, BLUR_DIV // 2
    if kind is Kind.SHARPEN:
        return SHARPEN_KERNEL, SHARPEN_DIV, 0
    raise ValueError(f"{kind} is not a convolution")


def conv_bounds(kind: Kind) -> tuple[int, int]:
    """Range of ``floor((h * x + bias) / div)`` over 8-bit inputs."""
    h, div, bias = conv_kernel(kind)
    lo = int(np.minimum(h, 0).sum()) * 255 + bias
    hi = int(np.maximum(h, 0).sum()) * 255 + bias
    return lo // div, hi // div


def round_and_clip(v: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(v + 0.5), 0, 255).astype(np.int64)


def contrast_map(f: float) -> np.ndarray:
    p = np.arange(256, dtype=np.float64)
    return round_and_clip(128.0 + f * (p - 128.0))


def gain_map(f: float) -> np.ndarray:
    return round_and_clip(f * np.arange(256, dtype=np.float64))


def channel_maps(spec: TransformSpec) -> list[np.ndarray]:
    """The per-channel 256-entry maps of a pointwise transform."""
    if spec.kind is Kind.CONTRAST:
        m = contrast_map(spec["f"])
        return [m, m, m]
    if spec.kind is Kind.WHITEBALANCE:
        return [gain_map(spec[c]) for c in ("r", "g", "b")]
    raise ValueError(f"{spec.kind} is not pointwise")


def region_mask(regions: tuple[Region, ...], width: int, height: int) -> np.ndarray:
    """Boolean (H, W) mask of censored pixels.

    Ovals use the filled-ellipse rule ``(x-cx)²ry² + (y-cy)²rx² <= rx²ry²``.
    """
    mask = np.zeros((height, width), dtype=bool)
    yy, xx = np.ogrid[:height, :width]
    for r in regions:
        if r.shape == "rect":
            mask[r.b : r.b + r.d, r.a : r.a + r.c] = True
        else:
            cx, cy, rx, ry = r.a, r.b, r.c, r.d
            dx = (xx - cx).astype(np.int64)
            dy = (yy - cy).astype(np.int64)
            mask |= dx * dx * ry * ry + dy * dy * rx * rx <= rx * rx * ry * ry
    return mask


def remap(arr: np.ndarray, spec: TransformSpec, fill) -> np.ndarray:
    """Apply a geometric transform to any (H, W, ...) array; ``fill`` for vacated pixels."""
    H, W = arr.shape[:2]
    k = spec.kind
    spec.output_dims((W, H))
    if k is Kind.CROP:
        x, y = spec["x"], spec["y"]
        return arr[y : y + spec["h"], x : x + spec["w"]]
    if k is Kind.ROTATE:
        return np.rot90(arr, k=(spec["deg"] % 360) // 90)
    if k is Kind.FLIP:
        return arr[::-1] if spec["axis"] == "x" else arr[:, ::-1]
    if k is Kind.TRANSLATE:
        dx, dy = spec["dx"], spec["dy"]
        out = np.full_like(arr, fill)
        if abs(dx) < W and abs(dy) < H:
            out[max(dy, 0) : H + min(dy, 0), max(dx, 0) : W + min(dx, 0)] = \
                arr[max(-dy, 0) : H - max(dy, 0), max(-dx, 0) : W - max(dx, 0)]
        return out
    if k is Kind.RESIZE:
        w, h = spec["w"], spec["h"]
        ys = (np.arange(h, dtype=np.int64) * H) // h
        xs = (np.arange(w, dtype=np.int64) * W) // w
        return arr[ys][:, xs]
    if k is Kind.CENSOR:
        out = arr.copy()
        out[region_mask(spec.regions, W, H)] = fill
        return out
    raise ValueError(f"{k} is not geometric")


def apply_native(spec: TransformSpec, img: Image) -> Image:
    k = spec.kind
    data = img.data
    if k in (Kind.CROP, Kind.ROTATE, Kind.FLIP, Kind.TRANSLATE, Kind.RESIZE, Kind.CENSOR):
        return Image(np.ascontiguousarray(remap(data, spec, 0)))
    if k in (Kind.CONTRAST, Kind.WHITEBALANCE):
        maps = channel_maps(spec)
        out = np.empty_like(data)
        for c in range(3):
            out[..., c] = maps[c][data[..., c]]
        return Image(out)
    if k in (Kind.RGB2YCBCR, Kind.YCBCR2RGB):
        K, off = fixed_point_matrix(k)
        raw = _kernels.affine3(data, K, off, SCALE_BITS)
        return Image(np.clip(raw, 0, 255).astype(np.uint8))
    if k in (Kind.SHARPEN, Kind.BLUR):
        h, div, bias = conv_kernel(k)
        acc = _kernels.convolve3x3(data, h) + bias
        return Image(np.clip(acc // div, 0, 255).astype(np.uint8))
    raise ValueError(f"unknown transform {k}")


def apply_all(specs, img: Image) -> Image:
    for s in specs:
        img = apply_native(s, img)
    return img
