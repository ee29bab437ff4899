"""Compiled kernels vs. the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeats N]

Prints one line per (kernel, shape) with the median time of each backend and
the speedup. Needs the extension to be built (``pip install -e .``).
"""

import argparse
import time

import numpy as np

from fsru import _kernels_py as py

try:
    from fsru import _ckernels as cy
except ImportError:
    cy = None


def median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def fft_case(mod, re, im):
    def run():
        mod.fft_inplace(re.copy(), im.copy())
    return run


def conv_case(mod, x, kernel):
    def run():
        mod.circular_conv_direct(x, kernel)
    return run


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=15)
    args = parser.parse_args()
    if cy is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<8}{'L':>6}{'d':>6}{'cython ms':>12}{'python ms':>12}{'speedup':>9}")
    for L, d in [(64, 64), (256, 256), (1024, 256)]:
        re, im = rng.normal(size=(L, d)), rng.normal(size=(L, d))
        tc = median_time(fft_case(cy, re, im), args.repeats)
        tp = median_time(fft_case(py, re, im), args.repeats)
        print(f"{'fft':<8}{L:>6}{d:>6}{tc * 1e3:>12.3f}{tp * 1e3:>12.3f}{tp / tc:>9.1f}")
    for L, d in [(64, 16), (256, 32), (512, 64)]:
        x, kernel = rng.normal(size=(L, d)), rng.normal(size=(L, d))
        tc = median_time(conv_case(cy, x, kernel), args.repeats)
        tp = median_time(conv_case(py, x, kernel), args.repeats)
        print(f"{'conv':<8}{L:>6}{d:>6}{tc * 1e3:>12.3f}{tp * 1e3:>12.3f}{tp / tc:>9.1f}")


if __name__ == "__main__":
    main()
