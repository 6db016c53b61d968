"""Benchmark the compiled kernels against the pure-numpy fallback.

Run with the package installed (the extension must be built) to compare
both implementations on the hot call shapes used by the quadrature engine
and the closed-loop monitors:

    python benchmarks/bench_kernels.py
"""
import time

import numpy as np

from etmpc import _kernels_py

try:
    from etmpc import _kernels
except ImportError:
    _kernels = None


def bench(fn, *args, repeat=200):
    fn(*args)  # warm-up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def main():
    rng = np.random.default_rng(0)
    cases = []

    x = rng.normal(size=(2000, 4))
    u = rng.normal(size=(2000, 2))
    cases.append(("arm_rates (2000 pts)", "arm_rates", (x, u)))

    coeffs = rng.normal(size=(50, 4, 4))
    breaks = np.linspace(0.0, 4.0, 51)
    ts = rng.uniform(0.0, 4.0, 2000)
    cases.append(("poly_eval (50 seg, 2000 pts)", "poly_eval", (coeffs, breaks, ts)))
    cases.append(("poly_eval deriv", "poly_eval", (coeffs, breaks, ts, 1)))

    print(f"{'case':<32} {'python':>10} {'cython':>10} {'speedup':>8}")
    for label, name, args in cases:
        t_py = bench(getattr(_kernels_py, name), *args)
        if _kernels is not None:
            t_cy = bench(getattr(_kernels, name), *args)
            print(f"{label:<32} {t_py*1e6:>8.1f}us {t_cy*1e6:>8.1f}us "
                  f"{t_py/t_cy:>7.1f}x")
        else:
            print(f"{label:<32} {t_py*1e6:>8.1f}us {'n/a':>10} {'n/a':>8}")
    if _kernels is None:
        print("compiled extension not available; build with pip install -e .")


if __name__ == "__main__":
    main()
