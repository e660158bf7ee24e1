"""The twelve image transforms: specs, native semantics and circuit synthesis."""

from .native import apply_all, apply_native
from .spec import (
    COLORSPACE,
    CONVOLUTION,
    GEOMETRIC,
    POINTWISE,
    Kind,
    Region,
    TransformSpec,
    blur,
    censor,
    contrast,
    crop,
    flip,
    oval,
    rect,
    resize,
    rgb2ycbcr,
    rotate,
    sharpen,
    translate,
    whitebalance,
    ycbcr2rgb,
)
from .synth import (
    RowPack,
    row_pack,
    synth_colorspace,
    synth_convolution,
    synth_copy_geometry,
    synth_pointwise_lut,
    synthesize,
)

__all__ = [
    "COLORSPACE", "CONVOLUTION", "GEOMETRIC", "POINTWISE", "Kind", "Region", "RowPack",
    "TransformSpec", "apply_all", "apply_native", "blur", "censor", "contrast", "crop", "flip",
    "oval", "rect", "resize", "rgb2ycbcr", "rotate", "row_pack", "sharpen", "synth_colorspace",
    "synth_convolution", "synth_copy_geometry", "synth_pointwise_lut", "synthesize", "translate",
    "whitebalance", "ycbcr2rgb",
]
