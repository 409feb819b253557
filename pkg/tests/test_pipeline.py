import math

import numpy as np
import pytest

from acoslc.aco import AcoParams, Tour
from acoslc.clustering import ClassState
from acoslc.instance_io import Instance, bundled_seeds, distance_matrix, load_instance
from acoslc.kernels import count_crossings
from acoslc.pipeline import (
    Algorithm, Bridge, PipelineError, SolverConfig, StitchPlan, build_centroid_graph,
    format_tour, interclass_min_distance, join_routes, make_plan, order_classes, parse_tour,
    remove_cross_edges, segments_intersect, select_bridges, solve, solve_class, stitch_length,
)


def classes_of(groups, coords):
    return [ClassState.of(g, coords) for g in groups]


def is_perm(order, n):
    return sorted(np.asarray(order).tolist()) == list(range(n))


def test_algorithm_names():
    assert Algorithm.parse("aco_slc_lwcr") is Algorithm.ACO_SLC_LWCR
    assert Algorithm.parse("ACO-SLC-Mixture") is Algorithm.ACO_SLC_MIXTURE
    assert Algorithm.parse("ACO_KMEANS") is Algorithm.ACO_KMEANS
    with pytest.raises(ValueError):
        Algorithm.parse("simulated annealing")


# --- centroid graph ---------------------------------------------------------

def test_interclass_min_distance_examples():
    pts = np.array([[0.0, 0.0], [3.0, 4.0], [3.0, 4.0]])
    d = distance_matrix(pts, "exact")
    assert interclass_min_distance([0], [1], d) == 5
    assert interclass_min_distance([0, 1], [2], d) == 0


def test_interclass_min_distance_matches_scan():
    rng = np.random.default_rng(0)
    pts = np.concatenate([rng.normal(0, 5, (50, 2)), rng.normal(40, 5, (50, 2))])
    d = distance_matrix(pts, "exact")
    scan = min(d[i, j] for i in range(50) for j in range(50, 100))
    assert interclass_min_distance(range(50), range(50, 100), d) == scan


def test_centroid_graph_triangle_and_single():
    pts = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 4.0]])
    d = distance_matrix(pts, "exact")
    g = build_centroid_graph(classes_of([[0], [1], [2]], pts), d)
    assert np.allclose(g.weights, d)
    assert build_centroid_graph(classes_of([[0, 1, 2]], pts), d).weights.shape == (1, 1)


def test_centroid_graph_weights_match_pairwise():
    rng = np.random.default_rng(1)
    pts = rng.uniform(0, 100, (40, 2))
    groups = np.array_split(rng.permutation(40), 6)
    d = distance_matrix(pts)
    g = build_centroid_graph(classes_of(groups, pts), d)
    for i in range(6):
        for j in range(6):
            if i != j:
                assert g.weights[i, j] == interclass_min_distance(groups[i], groups[j], d)
    assert np.array_equal(g.weights, g.weights.T)


def test_order_classes_examples():
    pts = np.array([[0.0, 0.0], [0.0, 10.0], [10.0, 10.0], [10.0, 0.0]])
    d = distance_matrix(pts, "exact")
    one = build_centroid_graph(classes_of([[0, 1, 2, 3]], pts), d)
    assert order_classes(one, AcoParams()) == [0]
    two = build_centroid_graph(classes_of([[0, 1], [2, 3]], pts), d)
    assert order_classes(two, AcoParams()) == [0, 1]
    # corners listed so that index order would hop a diagonal
    square = build_centroid_graph(classes_of([[0], [2], [1], [3]], pts), d)
    for s in range(5):
        order = order_classes(square, AcoParams(), np.random.default_rng(s))
        hops = [square.weights[order[i], order[(i + 1) % 4]] for i in range(4)]
        assert hops == [10.0] * 4


# --- bridges and stitching ----------------------------------------------------

def test_two_singleton_bridges():
    pts = np.array([[0.0, 0.0], [3.0, 4.0]])
    d = distance_matrix(pts)
    bridges, reused = select_bridges(classes_of([[0], [1]], pts), [0, 1], d)
    assert [(b.a, b.b) for b in bridges] == [(0, 1), (1, 0)] and reused == 0


def test_bridge_tie_breaks_to_lower_ids():
    pts = np.array([[0.0, 0.0], [0.0, 1.0], [5.0, 0.0], [5.0, 1.0]])
    d = distance_matrix(pts, "exact")
    bridges, _ = select_bridges(classes_of([[0, 1], [2, 3]], pts), [0, 1], d)
    assert (bridges[0].a, bridges[0].b) == (0, 2)
    assert (bridges[1].a, bridges[1].b) == (3, 1)


def test_three_class_borders_distinct():
    rng = np.random.default_rng(3)
    pts = np.concatenate([rng.normal(c, 3, (10, 2)) for c in [(0, 0), (50, 0), (25, 40)]])
    classes = classes_of([range(10), range(10, 20), range(20, 30)], pts)
    d = distance_matrix(pts)
    plan = make_plan(classes, [0, 1, 2], d)
    assert len(plan.bridges) == 3
    for c, (u, v) in plan.pseudo_edges.items():
        assert u != v
        assert u in classes[c].members and v in classes[c].members


def test_solve_class_examples():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [9.0, 9.0]])
    d = distance_matrix(pts, "exact")
    pair = solve_class([0, 3], 0, 3, d, AcoParams())
    assert pair.order.tolist() == [0, 3] and pair.length == 6
    single = solve_class([4], 4, 4, d, AcoParams())
    assert single.order.tolist() == [4] and single.length == 0
    line = solve_class([2, 0, 3, 1], 0, 3, d, AcoParams(), rng=np.random.default_rng(0))
    assert line.length == pytest.approx(6)
    assert line.has_edge(0, 3)


def test_join_single_class_unchanged():
    pts = np.random.default_rng(0).uniform(0, 10, (5, 2))
    d = distance_matrix(pts)
    t = Tour([2, 0, 4, 1, 3], 17.0)
    plan = StitchPlan([0], [], {})
    out = join_routes(plan, {0: t}, d)
    assert out.order.tolist() == [2, 0, 4, 1, 3] and out.length == 17


def test_join_two_singletons():
    pts = np.array([[0.0, 0.0], [3.0, 4.0]])
    d = distance_matrix(pts)
    classes = classes_of([[0], [1]], pts)
    plan = make_plan(classes, [0, 1], d)
    local = {0: Tour([0], 0), 1: Tour([1], 0)}
    out = join_routes(plan, local, d)
    assert sorted(out.order.tolist()) == [0, 1] and out.length == 10


def test_join_rectangle_perimeter():
    pts = np.array([[0.0, 0.0], [0.0, 1.0], [4.0, 0.0], [4.0, 1.0]])
    d = distance_matrix(pts, "exact")
    classes = classes_of([[0, 1], [2, 3]], pts)
    plan = make_plan(classes, [0, 1], d)
    local = {c: solve_class(classes[c].members, *plan.pseudo_edges[c], d, AcoParams()) for c in (0, 1)}
    out = join_routes(plan, local, d)
    assert out.length == pytest.approx(10)
    assert out.length == pytest.approx(stitch_length(plan, local, d))


# --- cross-edge removal ---------------------------------------------------------

@pytest.mark.parametrize("a1,a2,b1,b2,expect", [
    ((0, 0), (1, 1), (0, 1), (1, 0), True),
    ((0, 0), (1, 0), (0, 1), (1, 1), False),
    ((0, 0), (1, 1), (1, 1), (2, 0), False),
    ((0, 0), (2, 0), (1, 0), (1, 5), True),   # T-touch counts
])
def test_segments_intersect(a1, a2, b1, b2, expect):
    assert segments_intersect(a1, a2, b1, b2) is expect


def test_unit_square_uncrossed():
    pts = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    d = distance_matrix(pts, "exact")
    t = Tour([0, 1, 2, 3], float(2 + 2 * math.sqrt(2)))
    out = remove_cross_edges(t, pts, dist=d)
    assert out.length == 4
    assert is_perm(out.order, 4)


def test_convex_polygon_unchanged():
    a = np.linspace(0, 2 * np.pi, 9, endpoint=False)
    pts = np.column_stack([np.cos(a), np.sin(a)])
    out = remove_cross_edges(Tour(np.arange(9), 0.0), pts)
    assert out.order.tolist() == list(range(9))


def test_random_tours_lose_all_crossings():
    rng = np.random.default_rng(12)
    pts = rng.uniform(0, 1, (40, 2))
    d = distance_matrix(pts, "exact")
    for _ in range(10):
        order = rng.permutation(40)
        before = d[order, np.roll(order, -1)].sum()
        out = remove_cross_edges(Tour(order, before), pts, dist=d)
        assert count_crossings(out.order, pts) == 0
        assert out.length <= before + 1e-9


# --- end to end -----------------------------------------------------------------

def test_solve_eight_city_aco():
    pts = np.random.default_rng(5).uniform(0, 1000, (8, 2))
    res = solve(Instance("eight", pts), Algorithm.ACO)
    assert is_perm(res.tour.order, 8)
    assert res.timings["total"] > 0


def test_solve_two_blobs_with_seeds():
    rng = np.random.default_rng(6)
    pts = np.concatenate([rng.normal((0, 0), 20, (40, 2)), rng.normal((500, 0), 20, (40, 2))])
    from acoslc.instance_io import SeedSet
    seeds = SeedSet("blobs", np.array([[0.0, 0.0], [500.0, 0.0]]))
    res = solve(Instance("blobs", pts), Algorithm.ACO_SLC, seeds=seeds)
    assert is_perm(res.tour.order, 80)
    assert res.plan is not None


@pytest.mark.parametrize("alg", list(Algorithm))
def test_all_algorithms_on_ch130(alg):
    inst = load_instance("ch130")
    res = solve(inst, alg, SolverConfig(aco=AcoParams(seed=1)),
                seeds=bundled_seeds("ch130"))
    assert is_perm(res.tour.order, 130)
    d = inst.distance_matrix()
    assert res.tour.length == pytest.approx(d[res.tour.order, np.roll(res.tour.order, -1)].sum())
    assert res.tour.length >= 6110


def test_clustered_solve_keeps_plan():
    inst = load_instance("pr136")
    res = solve(inst, Algorithm.ACO_SLC, SolverConfig(aco=AcoParams(seed=2)), seeds=bundled_seeds("pr136"))
    assert res.plan is not None and len(res.classes) > 1


def test_pipeline_error_names_phase():
    pts = np.random.default_rng(0).uniform(0, 10, (10, 2))
    bad = SolverConfig(aco=AcoParams(t_max=1))
    with pytest.raises(PipelineError) as e:
        solve(Instance("x", pts), Algorithm.ACO_SLC, bad, seeds=np.zeros((0, 2)))
    assert e.value.phase == "clustering"


def test_tour_file_roundtrip():
    inst = load_instance("ch130")
    res = solve(inst, Algorithm.ACO_SLC, SolverConfig(aco=AcoParams(seed=1)), seeds=bundled_seeds("ch130"))
    text = format_tour(inst, res.tour, "ACO-SLC")
    order, length = parse_tour(text)
    assert order.tolist() == res.tour.order.tolist()
    assert length == res.tour.length
    assert "TOUR_SECTION" in text and "DISTANCE: rounded" in text
