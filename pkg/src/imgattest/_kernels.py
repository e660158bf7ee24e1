"""Hot integer kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports and ``IMGATTEST_DISABLE_NUMBA`` is
unset (or ``0``).  Both paths are importable directly as ``*_numba`` /
``*_numpy`` so tests and ``benchmarks/bench_kernels.py`` can compare them.
Field arithmetic never goes through here: numba has no 254-bit integers.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    HAVE_NUMBA = False


def _numba_requested() -> bool:
    flag = os.environ.get("IMGATTEST_DISABLE_NUMBA", "").strip().lower()
    return flag in ("", "0", "false", "no")


USE_NUMBA = HAVE_NUMBA and _numba_requested()


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# --------------------------------------------------------------------------
# 3x3 convolution with clamp-to-edge borders


def convolve3x3_numpy(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Integer convolution ``y[m,n] = sum x[m-i][n-j] * h[i][j]``, i,j in -1..1."""
    x = np.asarray(img, dtype=np.int64)
    h = np.asarray(kernel, dtype=np.int64)
    H, W = x.shape[:2]
    pad = np.pad(x, ((1, 1), (1, 1), (0, 0)), mode="edge")
    acc = np.zeros_like(x)
    for i in (-1, 0, 1):
        for j in (-1, 0, 1):
            c = h[i + 1, j + 1]
            if c:
                acc += c * pad[1 - i : 1 - i + H, 1 - j : 1 - j + W]
    return acc


# --------------------------------------------------------------------------
# fixed-point 3x3 affine map (colorspace conversion)


def affine3_numpy(pix: np.ndarray, K: np.ndarray, offsets: np.ndarray, shift: int) -> np.ndarray:
    """``floor((K @ p + offsets) / 2**shift)`` per pixel, unclamped."""
    p = np.asarray(pix, dtype=np.int64).reshape(-1, 3)
    acc = p @ np.asarray(K, dtype=np.int64).T + np.asarray(offsets, dtype=np.int64)
    return (acc >> shift).reshape(np.shape(pix))


def colorspace_sweep_numpy(K_fwd, off_fwd, K_inv, off_inv, shift):
    """Exhaustive pass over all 2**24 RGB triples.

    Returns ``(fwd_min, fwd_max, raw_min, raw_max, max_roundtrip_err)`` where
    ``fwd_*`` bound the clamped forward outputs and ``raw_*`` the unclamped ones.
    """
    gb = np.arange(1 << 16, dtype=np.int64)
    g = gb >> 8
    b = gb & 0xFF
    fmin, fmax, rmin, rmax, err = 1 << 30, -(1 << 30), 1 << 30, -(1 << 30), 0
    for r in range(256):
        rgb = np.stack([np.full_like(g, r), g, b], axis=1)
        raw = affine3_numpy(rgb, K_fwd, off_fwd, shift)
        ycc = np.clip(raw, 0, 255)
        back = np.clip(affine3_numpy(ycc, K_inv, off_inv, shift), 0, 255)
        rmin = min(rmin, int(raw.min()))
        rmax = max(rmax, int(raw.max()))
        fmin = min(fmin, int(ycc.min()))
        fmax = max(fmax, int(ycc.max()))
        err = max(err, int(np.abs(back - rgb).max()))
    return fmin, fmax, rmin, rmax, err


# --------------------------------------------------------------------------
# union-find over copy-constraint edges


def union_find_numpy(n: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    g = coo_matrix((np.ones(len(a), dtype=np.int8), (a, b)), shape=(n, n))
    _, labels = connected_components(g, directed=False)
    # canonical label: smallest member id of each class
    first = np.full(labels.max() + 1, n, dtype=np.int64)
    np.minimum.at(first, labels, np.arange(n, dtype=np.int64))
    return first[labels]


# --------------------------------------------------------------------------
# sorted-table membership


def member_sorted_numpy(values: np.ndarray, table: np.ndarray) -> np.ndarray:
    return np.isin(values, table)


if HAVE_NUMBA:

    @njit(cache=True)
    def convolve3x3_numba(img, kernel):
        H, W, C = img.shape
        out = np.zeros((H, W, C), dtype=np.int64)
        for m in range(H):
            for n in range(W):
                for c in range(C):
                    acc = 0
                    for i in range(-1, 2):
                        mm = min(max(m - i, 0), H - 1)
                        for j in range(-1, 2):
                            nn = min(max(n - j, 0), W - 1)
                            acc += np.int64(img[mm, nn, c]) * kernel[i + 1, j + 1]
                    out[m, n, c] = acc
        return out

    @njit(cache=True)
    def _affine3_rows(p, K, off, shift):
        n = p.shape[0]
        out = np.empty((n, 3), dtype=np.int64)
        for i in range(n):
            for k in range(3):
                acc = off[k]
                for j in range(3):
                    acc += K[k, j] * p[i, j]
                out[i, k] = acc >> shift
        return out

    def affine3_numba(pix, K, offsets, shift):
        p = np.ascontiguousarray(np.asarray(pix, dtype=np.int64).reshape(-1, 3))
        out = _affine3_rows(
            p, np.asarray(K, dtype=np.int64), np.asarray(offsets, dtype=np.int64), shift
        )
        return out.reshape(np.shape(pix))

    @njit(cache=True)
    def _sweep(K_fwd, off_fwd, K_inv, off_inv, shift):
        fmin, fmax = 1 << 30, -(1 << 30)
        rmin, rmax = 1 << 30, -(1 << 30)
        err = 0
        src = np.empty(3, dtype=np.int64)
        ycc = np.empty(3, dtype=np.int64)
        for r in range(256):
            src[0] = r
            for g in range(256):
                src[1] = g
                for b in range(256):
                    src[2] = b
                    for k in range(3):
                        acc = off_fwd[k]
                        for j in range(3):
                            acc += K_fwd[k, j] * src[j]
                        q = acc >> shift
                        rmin = min(rmin, q)
                        rmax = max(rmax, q)
                        q = min(max(q, 0), 255)
                        fmin = min(fmin, q)
                        fmax = max(fmax, q)
                        ycc[k] = q
                    for k in range(3):
                        acc = off_inv[k]
                        for j in range(3):
                            acc += K_inv[k, j] * ycc[j]
                        q = min(max(acc >> shift, 0), 255)
                        err = max(err, abs(q - src[k]))
        return fmin, fmax, rmin, rmax, err

    def colorspace_sweep_numba(K_fwd, off_fwd, K_inv, off_inv, shift):
        as64 = lambda x: np.asarray(x, dtype=np.int64)  # noqa: E731
        res = _sweep(as64(K_fwd), as64(off_fwd), as64(K_inv), as64(off_inv), shift)
        return tuple(int(v) for v in res)

    @njit(cache=True)
    def _uf(n, a, b):
        parent = np.arange(n)
        for e in range(a.shape[0]):
            x = a[e]
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            y = b[e]
            while parent[y] != y:
                parent[y] = parent[parent[y]]
                y = parent[y]
            # union by smaller id keeps the root canonical
            if x < y:
                parent[y] = x
            elif y < x:
                parent[x] = y
        for i in range(n):
            r = i
            while parent[r] != r:
                r = parent[r]
            parent[i] = r
        return parent

    def union_find_numba(n, a, b):
        return _uf(n, np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64))

    @njit(cache=True)
    def _member(values, table):
        out = np.empty(values.shape[0], dtype=np.bool_)
        m = table.shape[0]
        for i in range(values.shape[0]):
            v = values[i]
            lo, hi = 0, m
            while lo < hi:
                mid = (lo + hi) >> 1
                if table[mid] < v:
                    lo = mid + 1
                else:
                    hi = mid
            out[i] = lo < m and table[lo] == v
        return out

    @njit(cache=True)
    def _member_bitmap(values, table, lo, span):
        hit = np.zeros(span, dtype=np.bool_)
        for i in range(table.shape[0]):
            hit[table[i] - lo] = True
        out = np.empty(values.shape[0], dtype=np.bool_)
        for i in range(values.shape[0]):
            d = values[i] - lo
            out[i] = d >= 0 and d < span and hit[d]
        return out

    def member_sorted_numba(values, table):
        v = np.ascontiguousarray(values, dtype=np.int64).ravel()
        t = np.ascontiguousarray(table, dtype=np.int64)
        if len(t):
            lo, span = int(t[0]), int(t[-1]) - int(t[0]) + 1
            # dense tables (every lookup table we build) get an O(1) bitmap probe
            if span <= 4 * len(t) + (1 << 20):
                return _member_bitmap(v, t, lo, span).reshape(np.shape(values))
        return _member(v, t).reshape(np.shape(values))


if USE_NUMBA:
    convolve3x3 = convolve3x3_numba
    affine3 = affine3_numba
    colorspace_sweep = colorspace_sweep_numba
    union_find = union_find_numba
    member_sorted = member_sorted_numba
else:
    convolve3x3 = convolve3x3_numpy
    affine3 = affine3_numpy
    colorspace_sweep = colorspace_sweep_numpy
    union_find = union_find_numpy
    member_sorted = member_sorted_numpy
