"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--sizes 50,130,318] [--repeat 5]

Both paths consume the same uniforms, so the script also checks that they
produce identical tours before reporting times.  End-to-end runs honour the
ACOSLC_USE_NUMBA flag; compare with

    ACOSLC_USE_NUMBA=0 acoslc solve --instance d198 --algorithm ACO
"""
import argparse
import time

import numpy as np

from acoslc import kernels
from acoslc.aco import build_windows, heuristic_weights, little_window_size
from acoslc.instance_io import distance_matrix


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def _deposit(n, tours, nb):
    tau = np.ones((n, n))
    kernels.deposit(tau, tours, np.full(len(tours), 1000.0), 0.4, 300.0, 1e-12, use_numba=nb)
    return tau


def bench_size(n, repeat, rng):
    pts = rng.uniform(0, 1000, (n, 2))
    dist = distance_matrix(pts)
    weights = heuristic_weights(dist, 10.0)
    m = max(1, 2 * n // 3)
    u = rng.random((m, n))
    win = build_windows(dist, little_window_size(n))
    tour = rng.permutation(n)
    rows = []

    cases = {
        "construct": lambda nb: kernels.construct_tours(weights, dist, u, use_numba=nb)[0],
        "construct+window": lambda nb: kernels.construct_tours(weights, dist, u, win, (0, 1), use_numba=nb)[0],
        "lengths": lambda nb: kernels.tour_lengths(np.argsort(u, axis=1), dist, use_numba=nb),
        "deposit": lambda nb: _deposit(n, np.argsort(u, axis=1), nb),
        "uncross": lambda nb: kernels.uncross(tour, pts, dist, 10, use_numba=nb)[0],
    }
    for name, fn in cases.items():
        fn(True)  # compile
        t_nb, a = best_of(lambda: fn(True), repeat)
        t_np, b = best_of(lambda: fn(False), repeat)
        # deposit sums in a different order on each path
        same = np.allclose(a, b, rtol=1e-12) if name == "deposit" else np.array_equal(a, b)
        rows.append((n, name, t_nb, t_np, same))
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="50,130,318")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'n':>5} {'kernel':<17} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}  same")
    for n in map(int, args.sizes.split(",")):
        for n_, name, t_nb, t_np, same in bench_size(n, args.repeat, rng):
            print(f"{n_:>5} {name:<17} {1e3 * t_nb:>10.3f} {1e3 * t_np:>10.3f} {t_np / t_nb:>8.1f}  {same}")


if __name__ == "__main__":
    main()
