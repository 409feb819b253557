"""Invariant checks shared by the property tests and the acceptance suite.

Each check builds its random input from ``seed`` (plus a few size knobs) and
raises AssertionError on a violation.
"""
import numpy as np

from acoslc import kernels
from acoslc.aco import AcoParams, PheromoneState, Tour, build_windows, deposit_and_evaporate, run_aco
from acoslc.clustering import ClassState, ClusterConfig, compact_region, kmeans, slc, slc_mixture
from acoslc.instance_io import Instance, distance_matrix
from acoslc.pipeline import Algorithm, SolverConfig, join_routes, make_plan, solve, solve_class, stitch_length

FAST = AcoParams(t_max=5)


def _points(rng, n, layout):
    if layout == 0:
        return rng.uniform(0, 1000, (n, 2))
    if layout == 1:  # clumps
        k = max(1, n // 8)
        centers = rng.uniform(0, 1000, (k, 2))
        return centers[rng.integers(0, k, n)] + rng.normal(0, 15, (n, 2))
    # integer grid with duplicates
    return rng.integers(0, 6, (n, 2)).astype(float) * 10


def check_permutation(seed, n, algorithm_index):
    rng = np.random.default_rng(seed)
    pts = _points(rng, n, seed % 3)
    alg = list(Algorithm)[algorithm_index % len(Algorithm)]
    cfg = SolverConfig(aco=AcoParams(t_max=5, seed=seed), cluster=ClusterConfig(m0=int(rng.integers(1, 9))))
    res = solve(Instance(f"p{seed}", pts), alg, cfg)
    order = res.tour.order
    assert sorted(order.tolist()) == list(range(n)), f"{alg.value} returned a non-permutation"
    d = distance_matrix(pts)
    assert np.isclose(res.tour.length, d[order, np.roll(order, -1)].sum())


def check_partition(seed, n, which):
    rng = np.random.default_rng(seed)
    pts = _points(rng, n, seed % 3)
    ids = np.sort(rng.choice(n + 10, n, replace=False))
    coords = np.zeros((n + 10, 2))
    coords[ids] = pts
    m0 = int(rng.integers(1, 12))
    if which % 3 == 0:
        classes = slc(coords, ids, m0, rng=rng).classes
    elif which % 3 == 1:
        classes = slc_mixture(coords, ids, ClusterConfig(m0=m0), rng=rng).classes
    else:
        classes = kmeans(coords, ids, min(m0, n), rng=rng)
    got = np.concatenate([c.members for c in classes]) if classes else np.array([], dtype=np.int64)
    assert sorted(got.tolist()) == ids.tolist(), "partition lost or duplicated ids"
    assert all(len(c) > 0 for c in classes), "empty class emitted"


def check_compact_monotone(seed, n):
    rng = np.random.default_rng(seed)
    pts = _points(rng, n, seed % 3)
    cent = pts.mean(axis=0) + rng.normal(0, 50, 2)
    state = ClassState.of(np.arange(n), pts, cent)
    prev = None
    for p in range(6):
        kept, spilled = compact_region(state, p)
        assert sorted(np.concatenate([kept, spilled]).tolist()) == list(range(n))
        if prev is not None:
            assert set(kept.tolist()) <= prev, f"kept set grew from p={p - 1} to p={p}"
        prev = set(kept.tolist())


def check_pheromone(seed, n, ants):
    rng = np.random.default_rng(seed)
    state = PheromoneState.initial(n, float(rng.uniform(0.01, 5)))
    params = AcoParams(rho=float(rng.uniform(0.01, 0.99)), q=float(rng.uniform(1, 1000)))
    for _ in range(int(rng.integers(1, 30))):
        tours = np.argsort(rng.random((ants, n)), axis=1)
        lengths = rng.uniform(1, 1e4, ants)
        deposit_and_evaporate(state, tours, lengths, params)
        assert np.array_equal(state.tau, state.tau.T), "trail matrix lost symmetry"
        assert np.all(state.tau > 0), "non-positive trail"


def check_forced_edge(seed, n, windowed):
    rng = np.random.default_rng(seed)
    pts = _points(rng, n, seed % 3)
    d = distance_matrix(pts)
    u, v = (int(x) for x in rng.choice(n, 2, replace=False))
    win = build_windows(d, int(rng.integers(1, n))) if windowed else None
    t = run_aco(d, FAST, windows=win, forced_edge=(u, v), rng=rng)
    assert sorted(t.order.tolist()) == list(range(n))
    assert t.has_edge(u, v), f"forced edge ({u}, {v}) missing"


def check_stitch_identity(seed, n, k):
    rng = np.random.default_rng(seed)
    pts = _points(rng, n, seed % 3)
    d = distance_matrix(pts)
    k = min(k, n)
    labels = np.concatenate([np.arange(k), rng.integers(0, k, n - k)])
    rng.shuffle(labels)
    classes = [ClassState.of(np.flatnonzero(labels == c), pts) for c in range(k)]
    order = [int(c) for c in rng.permutation(k)]
    plan = make_plan(classes, order, d)
    local = {}
    for c in order:
        members = classes[c].members
        if k == 1:
            sub = run_aco(d[np.ix_(members, members)], FAST, rng=rng)
            local[c] = Tour(members[sub.order], sub.length)
        else:
            local[c] = solve_class(members, *plan.pseudo_edges[c], d, FAST, bool(seed % 2), rng)
    joined = join_routes(plan, local, d)
    assert sorted(joined.order.tolist()) == list(range(n))
    assert np.isclose(joined.length, stitch_length(plan, local, d)), "stitch length identity broken"


PROPERTIES = {
    "permutation validity": lambda s, r: check_permutation(s, int(r.integers(3, 40)), int(r.integers(0, 5))),
    "partition completeness": lambda s, r: check_partition(s, int(r.integers(1, 60)), int(r.integers(0, 3))),
    "compact region monotone in p": lambda s, r: check_compact_monotone(s, int(r.integers(1, 80))),
    "pheromone symmetry/positivity": lambda s, r: check_pheromone(s, int(r.integers(3, 20)), int(r.integers(1, 8))),
    "forced-edge inclusion": lambda s, r: check_forced_edge(s, int(r.integers(3, 30)), bool(r.integers(0, 2))),
    "stitch accounting identity": lambda s, r: check_stitch_identity(s, int(r.integers(2, 40)), int(r.integers(1, 8))),
}
