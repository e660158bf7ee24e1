import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from imgattest import _kernels as K
from imgattest.transforms.native import BLUR_KERNEL, SHARPEN_KERNEL, fixed_point_matrix
from imgattest.transforms.spec import Kind

pytestmark = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not installed")


def conv_loop(img, h):
    H, W, _ = img.shape
    out = np.zeros(img.shape, dtype=np.int64)
    for m in range(H):
        for n in range(W):
            for i in (-1, 0, 1):
                for j in (-1, 0, 1):
                    mm = min(max(m - i, 0), H - 1)
                    nn = min(max(n - j, 0), W - 1)
                    out[m, n] += img[mm, nn].astype(np.int64) * h[i + 1, j + 1]
    return out


images = st.tuples(st.integers(1, 9), st.integers(1, 9)).flatmap(
    lambda s: arrays(np.uint8, (s[0], s[1], 3)))


@given(images)
def test_convolve_backends_agree(img):
    for h in (BLUR_KERNEL, SHARPEN_KERNEL):
        a = K.convolve3x3_numpy(img, h)
        assert np.array_equal(a, K.convolve3x3_numba(img, h))
        assert np.array_equal(a, conv_loop(img, h))


@given(arrays(np.uint8, st.tuples(st.integers(1, 50), st.just(3))))
def test_affine_backends_agree(pix):
    for kind in (Kind.RGB2YCBCR, Kind.YCBCR2RGB):
        Km, off = fixed_point_matrix(kind)
        a = K.affine3_numpy(pix, Km, off, 15)
        assert np.array_equal(a, K.affine3_numba(pix, Km, off, 15))
        ref = [[(sum(int(Km[k, j]) * int(p[j]) for j in range(3)) + int(off[k])) >> 15 for k in range(3)]
               for p in pix]
        assert a.tolist() == ref


@given(st.integers(1, 40).flatmap(lambda n: st.tuples(
    st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=60))))
def test_union_find_backends_agree(case):
    n, edges = case
    a = np.array([e[0] for e in edges], dtype=np.int64)
    b = np.array([e[1] for e in edges], dtype=np.int64)
    x = K.union_find_numpy(n, a, b)
    assert np.array_equal(x, K.union_find_numba(n, a, b))
    # naive closure
    label = list(range(n))
    changed = True
    while changed:
        changed = False
        for u, v in edges:
            m = min(label[u], label[v])
            if label[u] != m or label[v] != m:
                label[u] = label[v] = m
                changed = True
    assert x.tolist() == label


@given(st.lists(st.integers(-50, 50), max_size=40), st.sets(st.integers(-50, 50), max_size=30))
def test_member_sorted_backends_agree(vals, table):
    v = np.array(vals, dtype=np.int64)
    t = np.array(sorted(table), dtype=np.int64)
    want = [x in table for x in vals]
    assert K.member_sorted_numpy(v, t).tolist() == want
    assert K.member_sorted_numba(v, t).tolist() == want


def test_colorspace_sweep_backends_agree():
    Kf, of = fixed_point_matrix(Kind.RGB2YCBCR)
    Ki, oi = fixed_point_matrix(Kind.YCBCR2RGB)
    assert K.colorspace_sweep_numba(Kf, of, Ki, oi, 15) == K.colorspace_sweep_numpy(Kf, of, Ki, oi, 15)


def test_env_flag_selects_numpy():
    code = "from imgattest import _kernels as K; print(K.backend(), K.convolve3x3.__name__)"
    env = dict(os.environ, IMGATTEST_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "convolve3x3_numpy"]
    env["IMGATTEST_DISABLE_NUMBA"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numba", "convolve3x3_numba"]


def test_member_sparse_table_uses_search_path():
    rng = np.random.default_rng(3)
    t = np.unique(rng.integers(-(1 << 40), 1 << 40, 500))
    v = np.concatenate([t[::3], rng.integers(-(1 << 40), 1 << 40, 500)])
    assert np.array_equal(K.member_sorted_numba(v, t), K.member_sorted_numpy(v, t))
