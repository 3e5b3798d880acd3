"""Compare the compiled and pure-numpy response-map kernels.

Runs the full detector filter bank over random images with each backend
and reports per-call timings plus a bit-exactness check.  The compiled
backend is skipped automatically if the extension is not built.

    python benchmarks/bench_kernels.py [--size 512] [--repeats 5]
"""

import argparse
import importlib
import time

import numpy as np

from pervisor.imagecore import GrayImage, integral
from pervisor.surf import OCTAVES
from pervisor.surf import _kernels_py


def load_backends():
    backends = {"python": _kernels_py}
    try:
        backends["cython"] = importlib.import_module("pervisor.surf._kernels")
    except ImportError:
        print("compiled extension not available; benchmarking python only")
    return backends


def bench(mod, padded, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for stride, sizes in OCTAVES:
            for size in sizes:
                mod.response_map(padded, size, stride)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=512, help="test image side")
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    img = GrayImage(rng.integers(0, 256, (args.size, args.size), dtype=np.uint8))
    padded = integral(img).padded
    backends = load_backends()

    times = {}
    for name, mod in backends.items():
        times[name] = bench(mod, padded, args.repeats)
        print(f"{name:8s} full filter bank on {args.size}x{args.size}: "
              f"{times[name] * 1e3:8.2f} ms")

    if len(backends) == 2:
        speedup = times["python"] / times["cython"]
        print(f"speedup: {speedup:.2f}x")
        for stride, sizes in OCTAVES:
            for size in sizes:
                r1, l1 = backends["python"].response_map(padded, size, stride)
                r2, l2 = backends["cython"].response_map(padded, size, stride)
                assert np.array_equal(r1, r2) and np.array_equal(l1, l2), (
                    f"backend mismatch at size={size} stride={stride}"
                )
        print("bit-exact: yes (all sizes and strides)")


if __name__ == "__main__":
    main()
