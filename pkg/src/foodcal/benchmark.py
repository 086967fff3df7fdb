"""Benchmark of the numba kernels against their pure-NumPy fallbacks.

Run with ``python -m foodcal.benchmark``. Both paths are timed directly,
regardless of the FOODCAL_NUMBA dispatch flag; the first numba call of each
kernel compiles (cached on disk), so a warmup call precedes timing.
"""

import argparse
import time

import numpy as np

from foodcal import _cart_kernels, _mask_kernels, backend
from foodcal.nnblocks import _conv_kernels


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _blob_mask(side, seed):
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:side, 0:side]
    mask = np.zeros((side, side), np.uint8)
    for _ in range(6):
        cx, cy = rng.uniform(side * 0.2, side * 0.8, 2)
        r = rng.uniform(side * 0.05, side * 0.18)
        mask |= ((xx - cx) ** 2 + (yy - cy) ** 2 <= r * r).astype(np.uint8)
    return mask


def _cases(scale):
    side = {"small": 128, "large": 512}[scale]
    mask = _blob_mask(side, 0)
    comp = _blob_mask(side, 1)
    comp[: side // 2] = 0  # likelier single component

    rng = np.random.default_rng(2)
    # block-reference size: the regime this package's forward passes run in
    xs = rng.normal(size=(2, 6, 12, 12))
    ws = rng.normal(size=(8, 6, 3, 3))
    xps = np.pad(xs, ((0, 0), (0, 0), (1, 1), (1, 1)))
    outs = np.zeros((2, 8, 12, 12))
    # channel-rich size: the regime where einsum lowers to BLAS and wins
    x = rng.normal(size=(4, 16, 32, 32))
    w = rng.normal(size=(32, 16, 3, 3))
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.zeros((4, 32, 32, 32))
    gy = rng.normal(size=out.shape)
    gw = np.empty_like(w)

    n_rows = {"small": 500, "large": 5000}[scale]
    X = rng.uniform(size=(n_rows, 9))
    y = rng.uniform(size=n_rows)
    feats = np.arange(9, dtype=np.int64)

    def conv_fwd(kernel):
        return lambda: kernel(xp, w, 1, out)

    def conv_gw(kernel):
        return lambda: kernel(xp, gy, 1, gw)

    def conv_gx(kernel):
        def run():
            gxp = np.zeros_like(xp)
            kernel(gy, w, 1, gxp)

        return run

    cases = [
        ("cc-label", lambda: _mask_kernels.label_numba(mask), lambda: _mask_kernels.label_numpy(mask)),
        ("trace", lambda: _mask_kernels.trace_numba(comp), lambda: _mask_kernels.trace_numpy(comp)),
        (
            "conv-fwd-small",
            lambda: _conv_kernels.fwd_numba(xps, ws, 1, outs),
            lambda: _conv_kernels.fwd_numpy(xps, ws, 1, outs),
        ),
        (
            "conv-fwd-wide",
            conv_fwd(_conv_kernels.fwd_numba),
            conv_fwd(_conv_kernels.fwd_numpy),
        ),
        (
            "conv2d-grad-w",
            conv_gw(_conv_kernels.grad_w_numba),
            conv_gw(_conv_kernels.grad_w_numpy),
        ),
        (
            "conv2d-grad-x",
            conv_gx(_conv_kernels.grad_x_numba),
            conv_gx(_conv_kernels.grad_x_numpy),
        ),
        (
            "cart-split",
            lambda: _cart_kernels._best_split_numba(X, y, feats, 1),
            lambda: _cart_kernels.best_split_numpy(X, y, feats, 1),
        ),
    ]
    return cases


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="foodcal.benchmark", description=__doc__)
    parser.add_argument("--scale", choices=("small", "large"), default="small")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    if not backend.HAVE_NUMBA:
        print("numba unavailable: only the NumPy fallback path can be timed")
    print(f"{'kernel':<14} {'numba':>10} {'numpy':>10} {'speedup':>8}")
    for name, numba_fn, numpy_fn in _cases(args.scale):
        t_np = _time(numpy_fn, args.repeat)
        if backend.HAVE_NUMBA:
            numba_fn()  # compile before timing
            t_nb = _time(numba_fn, args.repeat)
            print(f"{name:<14} {t_nb * 1e3:>8.2f}ms {t_np * 1e3:>8.2f}ms {t_np / t_nb:>7.1f}x")
        else:
            print(f"{name:<14} {'-':>10} {t_np * 1e3:>8.2f}ms {'-':>8}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
