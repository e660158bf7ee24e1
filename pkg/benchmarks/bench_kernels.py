"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat N] [--size WxH]
"""

import argparse
import time

import numpy as np

from imgattest import _kernels as K
from imgattest.transforms.native import SHARPEN_KERNEL, fixed_point_matrix
from imgattest.transforms.spec import Kind


def best_of(fn, repeat):
    fn()  # warm-up, includes numba compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", default="1280x720")
    ap.add_argument("--sweep", action="store_true", help="include the full 2**24 colorspace sweep")
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        raise SystemExit("numba is not installed")
    w, h = map(int, args.size.split("x"))
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, (h, w, 3), dtype=np.uint8)
    Kf, of = fixed_point_matrix(Kind.RGB2YCBCR)
    Ki, oi = fixed_point_matrix(Kind.YCBCR2RGB)
    n = h * w
    a = rng.integers(0, n, n, dtype=np.int64)
    b = rng.integers(0, n, n, dtype=np.int64)
    table = np.arange(0, 2 * n, 2, dtype=np.int64)
    vals = rng.integers(0, 2 * n, n, dtype=np.int64)

    cases = {
        "convolve3x3": lambda f: f(img, SHARPEN_KERNEL),
        "affine3": lambda f: f(img, Kf, of, 15),
        "union_find": lambda f: f(n, a, b),
        "member_sorted": lambda f: f(vals, table),
    }
    if args.sweep:
        cases["colorspace_sweep"] = lambda f: f(Kf, of, Ki, oi, 15)

    print(f"{'kernel':<18}{'numpy s':>12}{'numba s':>12}{'speedup':>10}")
    for name, call in cases.items():
        f_np = getattr(K, f"{name}_numpy")
        f_nb = getattr(K, f"{name}_numba")
        rep = 1 if name == "colorspace_sweep" else args.repeat
        t_np = best_of(lambda: call(f_np), rep)
        t_nb = best_of(lambda: call(f_nb), rep)
        print(f"{name:<18}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
