"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Both kernels run in the same process; the first numba call (compilation or
cache load) is excluded from timing.
"""

import argparse
import time

import numpy as np

from stlink.fec import DecodeAlgorithm, RscCode, bcjr
from stlink.fec.siso import _bcjr_loops, _bcjr_vectorized
from stlink.tde import _grid_errors_loops, _grid_errors_vectorized, default_pulse, grid_errors, select_bins


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_bcjr(repeat):
    rng = np.random.default_rng(0)
    rows = []
    for label, code, n in [("outer k=1", RscCode(0o7, (0o5,), 1), 2046),
                           ("inner k=2", RscCode(0o7, (0o5,), 2), 4096)]:
        lc = rng.normal(1.0, 2.0, code.codeword_length(n))
        la = rng.normal(0.0, 1.0, n)
        for alg in DecodeAlgorithm:
            t_nb = best_of(lambda: bcjr(lc, la, code, alg, kernel=_bcjr_loops), repeat)
            t_np = best_of(lambda: bcjr(lc, la, code, alg, kernel=_bcjr_vectorized), repeat)
            rows.append((f"bcjr {label} {alg.label}", t_nb, t_np))
    return rows


def bench_grid(repeat):
    rng = np.random.default_rng(1)
    pulse = default_pulse(64)
    sel = select_bins(pulse, 0.1, 2)
    rt = rng.normal(size=sel.size) + 1j * rng.normal(size=sel.size)
    g = np.arange(0, 64, 0.25)
    a, b = np.meshgrid(g, g, indexing="ij")
    keep = b > a
    lams = -2 * np.pi / 64 * np.stack([a[keep], b[keep]], axis=1)
    rows = []
    for real in (False, True):
        t_nb = best_of(lambda: grid_errors(lams, sel, rt, 1 / 64, real, kernel=_grid_errors_loops), repeat)
        t_np = best_of(lambda: grid_errors(lams, sel, rt, 1 / 64, real, kernel=_grid_errors_vectorized), repeat)
        rows.append((f"tde grid {len(lams)} pts real={real}", t_nb, t_np))
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'kernel':40s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for name, t_nb, t_np in bench_bcjr(args.repeat) + bench_grid(args.repeat):
        print(f"{name:40s} {1e3 * t_nb:11.2f} {1e3 * t_np:11.2f} {t_np / t_nb:8.1f}")


if __name__ == "__main__":
    main()
