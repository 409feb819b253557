import os
import subprocess
import sys

import numpy as np
import pytest

from acoslc import kernels
from acoslc.aco import build_windows, heuristic_weights, little_window_size
from acoslc.instance_io import distance_matrix

needs_numba = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")


def setup(n, seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 1000, (n, 2))
    d = distance_matrix(pts)
    tau = rng.uniform(0.1, 2.0, (n, n))
    tau = (tau + tau.T) / 2
    return rng, pts, d, tau * heuristic_weights(d, 10.0)


@needs_numba
@pytest.mark.parametrize("n", [3, 9, 40, 131])
@pytest.mark.parametrize("windowed", [False, True])
@pytest.mark.parametrize("forced", [None, (0, 2)])
def test_construct_paths_agree(n, windowed, forced):
    rng, _, d, w = setup(n, n)
    u = rng.random((max(1, 2 * n // 3), n))
    win = build_windows(d, min(little_window_size(n), 3)) if windowed else None
    a, fa = kernels.construct_tours(w, d, u, win, forced, use_numba=True)
    b, fb = kernels.construct_tours(w, d, u, win, forced, use_numba=False)
    assert np.array_equal(a, b) and fa == fb
    for row in a:
        assert sorted(row.tolist()) == list(range(n))
        if forced is not None:
            p = row.tolist().index(forced[0])
            assert forced[1] in (row[(p + 1) % n], row[p - 1])


@needs_numba
def test_window_fallback_counted_on_both_paths():
    rng, _, d, w = setup(30, 1)
    u = rng.random((20, 30))
    win = build_windows(d, 1)
    _, fa = kernels.construct_tours(w, d, u, win, use_numba=True)
    _, fb = kernels.construct_tours(w, d, u, win, use_numba=False)
    assert fa == fb > 0


@needs_numba
def test_lengths_and_deposit_agree():
    rng, _, d, _ = setup(50, 2)
    tours = np.argsort(rng.random((30, 50)), axis=1)
    la = kernels.tour_lengths(tours, d, use_numba=True)
    lb = kernels.tour_lengths(tours, d, use_numba=False)
    assert np.allclose(la, lb)
    ta, tb = np.ones((50, 50)), np.ones((50, 50))
    kernels.deposit(ta, tours, la, 0.4, 300.0, 1e-12, use_numba=True)
    kernels.deposit(tb, tours, lb, 0.4, 300.0, 1e-12, use_numba=False)
    assert np.allclose(ta, tb, rtol=1e-12)
    assert np.allclose(ta, ta.T)


@needs_numba
@pytest.mark.parametrize("seed", range(5))
def test_uncross_paths_agree(seed):
    rng, pts, _, _ = setup(60, seed)
    exact = distance_matrix(pts, "exact")
    tour = rng.permutation(60)
    a = kernels.uncross(tour, pts, exact, 10, use_numba=True)
    b = kernels.uncross(tour, pts, exact, 10, use_numba=False)
    assert np.array_equal(a[0], b[0]) and a[1:] == b[1:]


def test_count_crossings_square():
    pts = np.array([[0.0, 0], [1, 1], [1, 0], [0, 1]])
    assert kernels.count_crossings(np.arange(4), pts) == 1
    assert kernels.count_crossings(np.array([0, 2, 1, 3]), pts) == 0


def test_env_flag_selects_numpy_path():
    code = "from acoslc import kernels; print(kernels.USE_NUMBA)"
    env = dict(os.environ, ACOSLC_USE_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"
    env["ACOSLC_USE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == str(kernels.HAVE_NUMBA)
