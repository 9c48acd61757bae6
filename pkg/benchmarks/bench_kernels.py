"""Benchmark the numba kernels against the pure-numpy fallback.

Runs each hot kernel (2-D convolution across PSF sizes, SSIM window stats)
on both backends, checks the outputs agree, and prints a timing table.

    python benchmarks/bench_kernels.py [--repeats 5]

Backend selection in the library is via the SPECDEBLUR_DISABLE_NUMBA
environment variable; here both implementations are imported directly so a
single process can time the two lanes side by side.
"""

import argparse
import time

import numpy as np

from specdeblur import _kernels_numpy

try:
    from specdeblur import _kernels_numba

    HAS_NUMBA = True
except ImportError:
    _kernels_numba = None
    HAS_NUMBA = False


def time_call(fn, *args, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_convolution(repeats):
    rng = np.random.default_rng(0)
    rows = []
    for m, k in [(256, 5), (256, 13), (512, 13), (512, 25)]:
        padded = rng.random((m + k - 1, m + k - 1))
        kernel = rng.random((k, k))
        t_np, out_np = time_call(_kernels_numpy.correlate2d_valid, padded, kernel, repeats=repeats)
        row = {"case": f"convolve {m}x{m}, k={k}", "numpy_s": t_np}
        if HAS_NUMBA:
            _kernels_numba.correlate2d_valid(padded, kernel)  # compile outside the timer
            t_nb, out_nb = time_call(_kernels_numba.correlate2d_valid, padded, kernel, repeats=repeats)
            assert np.max(np.abs(out_np - out_nb)) < 1e-10, "backends disagree"
            row["numba_s"] = t_nb
        rows.append(row)
    return rows


def bench_ssim(repeats):
    rng = np.random.default_rng(1)
    rows = []
    for m in (256, 512):
        x = rng.random((m, m))
        y = rng.random((m, m))
        t_np, out_np = time_call(_kernels_numpy.ssim_map, x, y, 8, 1e-4, 9e-4, repeats=repeats)
        row = {"case": f"ssim map {m}x{m}, win=8", "numpy_s": t_np}
        if HAS_NUMBA:
            _kernels_numba.ssim_map(x, y, 8, 1e-4, 9e-4)
            t_nb, out_nb = time_call(_kernels_numba.ssim_map, x, y, 8, 1e-4, 9e-4, repeats=repeats)
            assert np.max(np.abs(np.sort(out_np) - np.sort(out_nb))) < 1e-10, "backends disagree"
            row["numba_s"] = t_nb
        rows.append(row)
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    if not HAS_NUMBA:
        print("numba unavailable: timing the numpy lane only")
    rows = bench_convolution(args.repeats) + bench_ssim(args.repeats)
    width = max(len(r["case"]) for r in rows)
    header = f"{'case':<{width}}  {'numpy':>10}"
    if HAS_NUMBA:
        header += f"  {'numba':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for r in rows:
        line = f"{r['case']:<{width}}  {r['numpy_s']*1e3:>8.2f}ms"
        if HAS_NUMBA:
            line += f"  {r['numba_s']*1e3:>8.2f}ms  {r['numpy_s']/r['numba_s']:>7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
