"""Numba vs numpy timings for the exhaustive-search kernels.

Run with ``python3 benchmarks/bench_kernels.py``. Each kernel is called once
to trigger compilation, then timed on both paths; results must agree.
"""

import argparse
import time

import numpy as np

from sosdecoder import _accel, kernels


def _time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _cases(rng, coset_dim, brute_n, qubo_n):
    n = coset_dim + 8
    base = (rng.random(n) < 0.5).astype(np.uint8)
    gens = (rng.random((coset_dim, n)) < 0.5).astype(np.uint8)
    costs = rng.uniform(0.5, 3.0, n)
    h = (rng.random((brute_n // 2, brute_n)) < 0.4).astype(np.uint8)
    s = h @ (rng.random(brute_n) < 0.3).astype(np.uint8) % 2
    bcost = rng.uniform(0.5, 3.0, brute_n)
    q = rng.normal(size=(qubo_n, qubo_n))
    q = 0.5 * (q + q.T)
    return {
        f"min_over_span (dim {coset_dim})": lambda: kernels.min_over_span(base, gens, costs),
        f"brute_force_mld (n {brute_n})": lambda: kernels.brute_force_mld(h, s, bcost),
        f"qubo_scan (N {qubo_n})": lambda: kernels.qubo_scan(q),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return np.isclose(a, b, rtol=0, atol=1e-9)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--coset-dim", type=int, default=18)
    ap.add_argument("--brute-n", type=int, default=18)
    ap.add_argument("--qubo-n", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed")
    cases = _cases(np.random.default_rng(0), args.coset_dim, args.brute_n, args.qubo_n)
    print(f"{'kernel':28s} {'numpy s':>10s} {'numba s':>10s} {'speedup':>8s}  agree")
    saved = _accel.USE_NUMBA
    try:
        for name, fn in cases.items():
            _accel.USE_NUMBA = True
            fn()  # compile
            t_nb, r_nb = _time(fn, args.repeat)
            _accel.USE_NUMBA = False
            t_np, r_np = _time(fn, args.repeat)
            print(f"{name:28s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f}  {_same(r_nb, r_np)}")
    finally:
        _accel.USE_NUMBA = saved


if __name__ == "__main__":
    main()
