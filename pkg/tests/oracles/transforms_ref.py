"""Per-pixel pure-Python reference for every transform kind (slow, obvious)."""

import math

import numpy as np

S = 1 << 15
FWD = ((0.299, 0.587, 0.114), (-0.168736, -0.331264, 0.5), (0.5, -0.418688, -0.081312))
FWD_BASE = (0, 128, 128)
INV = ((1.0, 0.0, 1.402), (1.0, -0.344136, -0.714136), (1.0, 1.772, 0.0))
BLUR = ((1, 2, 1), (2, 4, 2), (1, 2, 1))
SHARPEN = ((0, -1, 0), (-1, 5, -1), (0, -1, 0))


def clip8(v):
    return max(0, min(255, v))


def round_half_up(v):
    return math.floor(v + 0.5)


def in_region(r, x, y):
    if r.shape == "rect":
        return r.a <= x < r.a + r.c and r.b <= y < r.b + r.d
    cx, cy, rx, ry = r.a, r.b, r.c, r.d
    return (x - cx) ** 2 * ry * ry + (y - cy) ** 2 * rx * rx <= rx * rx * ry * ry


def apply(spec, px):
    """``px`` is an (H, W, 3) array; returns a new uint8 array."""
    src = [[[int(v) for v in p] for p in row] for row in px]
    H, W = len(src), len(src[0])
    kind = spec.kind.value

    def at(y, x):
        return src[y][x]

    if kind == "crop":
        out = [[at(y + spec["y"], x + spec["x"]) for x in range(spec["w"])] for y in range(spec["h"])]
    elif kind == "rotate":
        d = spec["deg"] % 360
        if d == 90:
            out = [[at(j, W - 1 - i) for j in range(H)] for i in range(W)]
        elif d == 180:
            out = [[at(H - 1 - i, W - 1 - j) for j in range(W)] for i in range(H)]
        elif d == 270:
            out = [[at(H - 1 - j, i) for j in range(H)] for i in range(W)]
        else:
            out = [[at(i, j) for j in range(W)] for i in range(H)]
    elif kind == "flip":
        if spec["axis"] == "x":
            out = [[at(H - 1 - y, x) for x in range(W)] for y in range(H)]
        else:
            out = [[at(y, W - 1 - x) for x in range(W)] for y in range(H)]
    elif kind == "translate":
        dx, dy = spec["dx"], spec["dy"]
        out = [[at(y - dy, x - dx) if 0 <= y - dy < H and 0 <= x - dx < W else [0, 0, 0]
                for x in range(W)] for y in range(H)]
    elif kind == "resize":
        w, h = spec["w"], spec["h"]
        out = [[at(y * H // h, x * W // w) for x in range(w)] for y in range(h)]
    elif kind == "censor":
        out = [[[0, 0, 0] if any(in_region(r, x, y) for r in spec.regions) else at(y, x)
                for x in range(W)] for y in range(H)]
    elif kind in ("contrast", "whitebalance"):
        if kind == "contrast":
            f = [spec["f"]] * 3
            fn = [lambda p, g=g: 128 + g * (p - 128) for g in f]
        else:
            fn = [lambda p, g=spec[c]: g * p for c in "rgb"]
        out = [[[clip8(round_half_up(fn[c](p[c]))) for c in range(3)] for p in row] for row in src]
    elif kind == "rgb2ycbcr":
        K = [[round(c * S) for c in r] for r in FWD]
        out = [[[clip8((sum(K[k][i] * p[i] for i in range(3)) + FWD_BASE[k] * S + S // 2) // S)
                 for k in range(3)] for p in row] for row in src]
    elif kind == "ycbcr2rgb":
        K = [[round(c * S) for c in r] for r in INV]
        out = []
        for row in src:
            orow = []
            for y, cb, cr in row:
                v = (y, cb - 128, cr - 128)
                orow.append([clip8((sum(K[k][i] * v[i] for i in range(3)) + S // 2) // S) for k in range(3)])
            out.append(orow)
    elif kind in ("blur", "sharpen"):
        h = BLUR if kind == "blur" else SHARPEN
        out = []
        for m in range(H):
            orow = []
            for n in range(W):
                pix = []
                for c in range(3):
                    s = 0
                    for i in (-1, 0, 1):
                        for j in (-1, 0, 1):
                            y = min(max(m - i, 0), H - 1)
                            x = min(max(n - j, 0), W - 1)
                            s += h[i + 1][j + 1] * src[y][x][c]
                    pix.append(clip8((s + 8) // 16) if kind == "blur" else clip8(s))
                orow.append(pix)
            out.append(orow)
    else:
        raise ValueError(kind)
    return np.array(out, dtype=np.uint8).reshape(len(out), len(out[0]), 3)
