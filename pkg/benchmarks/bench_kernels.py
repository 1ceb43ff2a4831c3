"""Compare the compiled and pure-numpy sliding-window kernels.

Usage: python benchmarks/bench_kernels.py [--n 580986] [--q 256] [--repeat 5]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from harvest_har.kernels import _pykernels

try:
    from harvest_har.kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=580986, help="series length in samples")
    ap.add_argument("--q", type=int, default=256, help="window length")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    x = np.random.default_rng(args.seed).random(args.n)
    backends = {"python": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    else:
        print("compiled extension not available; timing the numpy fallback only")

    results = {}
    for name, mod in backends.items():
        t_stats = best_of(lambda: mod.rolling_window_stats(x, args.q), args.repeat)
        t_mean = best_of(lambda: mod.rolling_mean(x, args.q), args.repeat)
        results[name] = (t_stats, t_mean)
        print(f"{name:>7}: rolling_window_stats {t_stats * 1e3:9.2f} ms   rolling_mean {t_mean * 1e3:8.2f} ms")

    if "cython" in results:
        a = _pykernels.rolling_window_stats(x, args.q)
        b = _ckernels.rolling_window_stats(x, args.q)
        print(f"max |python - cython| = {np.max(np.abs(a - b)):.3e}")
        sp = results["python"][0] / results["cython"][0]
        print(f"speed-up (window stats): {sp:.1f}x")


if __name__ == "__main__":
    main()
