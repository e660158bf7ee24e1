"""Random transform parameters valid for a given image size."""

import numpy as np

from imgattest.transforms import spec as T


def random_spec(kind: str, w: int, h: int, rng: np.random.Generator):
    r = lambda lo, hi: int(rng.integers(lo, hi + 1))  # noqa: E731
    if kind == "crop":
        cw, ch = r(1, w), r(1, h)
        return T.crop(r(0, w - cw), r(0, h - ch), cw, ch)
    if kind == "rotate":
        return T.rotate(int(rng.choice([90, 180, 270])))
    if kind == "flip":
        return T.flip(str(rng.choice(["x", "y"])))
    if kind == "translate":
        return T.translate(r(-w, w), r(-h, h))
    if kind == "resize":
        return T.resize(r(1, 2 * w), r(1, 2 * h))
    if kind == "censor":
        regions = []
        for _ in range(r(1, 3)):
            if rng.random() < 0.5:
                rw, rh = r(1, w), r(1, h)
                regions.append(T.rect(r(0, w - rw), r(0, h - rh), rw, rh))
            else:
                regions.append(T.oval(r(0, w - 1), r(0, h - 1), r(1, w), r(1, h)))
        return T.censor(*regions)
    if kind == "contrast":
        return T.contrast(round(float(rng.uniform(0.0, 3.0)), 3))
    if kind == "whitebalance":
        return T.whitebalance(*(round(float(rng.uniform(0.0, 2.0)), 3) for _ in range(3)))
    return getattr(T, kind)()


KINDS = ("crop", "rotate", "flip", "translate", "resize", "censor", "rgb2ycbcr", "ycbcr2rgb",
         "whitebalance", "contrast", "sharpen", "blur")
