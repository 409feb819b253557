"""Cluster-first, route-second assembly of a full tour from per-class ACO runs.

The flow for the clustered algorithms:

1. partition the cities (SLC, K-Means, or SLC-Mixture);
2. build the complete graph over classes, weighted by the closest pair of
   cities between two classes;
3. order the classes by running ACO on that graph;
4. pick one bridge edge per consecutive class pair, never reusing a border city;
5. solve every class with ACO, forcing the edge between its two border cities;
6. open each local cycle at that pseudo-edge and chain the paths with the bridges.

The LWCR variants add candidate windows to every ACO run and uncross the final tour.
"""
from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .aco import AcoParams, Tour, build_windows, little_window_size, run_aco
from .clustering import ClassState, ClusterConfig, default_m0, kmeans, slc, slc_mixture
from .instance_io import EdgeWeightType, Instance, SeedSet, distance_matrix
from .kernels import _segments_intersect_scalar, uncross

log = logging.getLogger(__name__)


class Algorithm(str, enum.Enum):
    ACO = "ACO"
    ACO_KMEANS = "ACO-K-Means"
    ACO_SLC = "ACO-SLC"
    ACO_SLC_LWCR = "ACO-SLC-LWCR"
    ACO_SLC_MIXTURE = "ACO-SLC-Mixture"

    @classmethod
    def parse(cls, name: str) -> "Algorithm":
        key = name.strip().upper().replace("_", "-")
        for a in cls:
            if a.value.upper() == key or a.name.replace("_", "-") == key:
                return a
        raise ValueError(f"unknown algorithm {name!r}; choose from {[a.value for a in cls]}")


class PipelineError(RuntimeError):
    def __init__(self, phase: str, cause: BaseException):
        self.phase = phase
        super().__init__(f"{phase}: {type(cause).__name__}: {cause}")


@dataclass(frozen=True)
class SolverConfig:
    aco: AcoParams = field(default_factory=AcoParams)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    uncross_passes: int = 10
    uncross_per_class: bool = False


@dataclass
class CentroidGraph:
    centroids: np.ndarray
    weights: np.ndarray


@dataclass
class Bridge:
    a: int  # city in the earlier class of the pair
    b: int  # city in the next class


@dataclass
class StitchPlan:
    class_order: list[int]
    bridges: list[Bridge]
    pseudo_edges: dict[int, tuple[int, int]]
    reused_borders: int = 0


@dataclass
class SolveResult:
    tour: Tour
    algorithm: Algorithm
    timings: dict[str, float]
    classes: list[ClassState] = field(default_factory=list)
    plan: StitchPlan | None = None
    notes: list[str] = field(default_factory=list)


def interclass_min_distance(a: Sequence[int], b: Sequence[int], dist: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both classes must be non-empty")
    return float(dist[np.ix_(a, b)].min())


def build_centroid_graph(classes: Sequence[ClassState], dist: np.ndarray) -> CentroidGraph:
    """Complete graph over classes; weight = closest cross pair, computed with two min-reductions."""
    k = len(classes)
    cents = np.array([c.centroid for c in classes], dtype=np.float64).reshape(-1, 2)
    if k == 1:
        return CentroidGraph(cents, np.zeros((1, 1)))
    order = np.concatenate([c.members for c in classes])
    starts = np.cumsum([0] + [len(c.members) for c in classes[:-1]])
    sub = dist[np.ix_(order, order)]
    w = np.minimum.reduceat(np.minimum.reduceat(sub, starts, axis=1), starts, axis=0)
    np.fill_diagonal(w, 0.0)
    return CentroidGraph(cents, w)


def order_classes(graph: CentroidGraph, params: AcoParams, rng: np.random.Generator | None = None) -> list[int]:
    k = len(graph.weights)
    if k <= 2:
        return list(range(k))
    tour = run_aco(graph.weights, params, rng=rng)
    order = tour.order.tolist()
    p = order.index(0)
    return order[p:] + order[:p]


def select_bridges(classes: Sequence[ClassState], class_order: Sequence[int],
                   dist: np.ndarray) -> tuple[list[Bridge], int]:
    """Greedy closest-pair bridges along the cyclic class order.

    A city that already borders one bridge is not offered again unless its
    class is a singleton.  If a class of two or more runs out of free cities
    the restriction is lifted for that pick and counted in the second return value.
    """
    k = len(class_order)
    if k < 2:
        return [], 0
    used: set[int] = set()
    reused = 0
    bridges = []

    def free(cls: ClassState) -> np.ndarray:
        ids = np.sort(cls.members)
        if len(ids) == 1:
            return ids
        return ids[[i not in used for i in ids.tolist()]]

    for pos in range(k):
        A = classes[class_order[pos]]
        B = classes[class_order[(pos + 1) % k]]
        fa, fb = free(A), free(B)
        if len(fa) == 0 or len(fb) == 0:
            log.warning("border cities exhausted between classes %d and %d; allowing reuse",
                        class_order[pos], class_order[(pos + 1) % k])
            reused += 1
            fa = fa if len(fa) else np.sort(A.members)
            fb = fb if len(fb) else np.sort(B.members)
        sub = dist[np.ix_(fa, fb)]
        i, j = np.unravel_index(int(np.argmin(sub)), sub.shape)  # row-major: ties to lower ids
        a, b = int(fa[i]), int(fb[j])
        used.update((a, b))
        bridges.append(Bridge(a, b))
    return bridges, reused


def make_plan(classes: Sequence[ClassState], class_order: Sequence[int], dist: np.ndarray) -> StitchPlan:
    bridges, reused = select_bridges(classes, class_order, dist)
    k = len(class_order)
    pseudo = {}
    if k >= 2:
        for pos, c in enumerate(class_order):
            entry = bridges[pos - 1].b
            exit_ = bridges[pos].a
            pseudo[c] = (entry, exit_)
    return StitchPlan(list(class_order), bridges, pseudo, reused)


def solve_class(members: Sequence[int], border_u: int, border_v: int, dist: np.ndarray,
                params: AcoParams, windows_enabled: bool = False,
                rng: np.random.Generator | None = None) -> Tour:
    """Local tour over ``members`` (global ids) that contains the edge ``(border_u, border_v)``."""
    members = np.asarray(members, dtype=np.int64)
    n = len(members)
    if border_u == border_v and n > 1:
        raise ValueError("border cities of a multi-city class must differ")
    if n == 1:
        return Tour(members.copy(), 0.0)
    lu = int(np.flatnonzero(members == border_u)[0])
    lv = int(np.flatnonzero(members == border_v)[0])
    if n == 2:
        return Tour(members[[lu, lv]], float(2 * dist[border_u, border_v]))
    sub = dist[np.ix_(members, members)]
    windows = build_windows(sub, little_window_size(n)) if windows_enabled else None
    local = run_aco(sub, params, windows=windows, forced_edge=(lu, lv), rng=rng)
    return Tour(members[local.order], local.length, local.iterations, local.window_fallbacks)


def open_at(order: np.ndarray, entry: int, exit_: int) -> list[int]:
    """Path from ``entry`` to ``exit_`` covering the cycle without the edge between them."""
    o = list(map(int, order))
    n = len(o)
    if n == 1:
        return o
    p = o.index(entry)
    if o[(p + 1) % n] == exit_:
        return [o[(p - i) % n] for i in range(n)]
    if o[(p - 1) % n] == exit_:
        return [o[(p + i) % n] for i in range(n)]
    raise ValueError(f"local tour lacks its pseudo-edge ({entry}, {exit_})")


def join_routes(plan: StitchPlan, local_tours: dict[int, Tour], dist: np.ndarray) -> Tour:
    if len(plan.class_order) == 1:
        t = local_tours[plan.class_order[0]]
        return Tour(t.order.copy(), t.length)
    path: list[int] = []
    for c in plan.class_order:
        entry, exit_ = plan.pseudo_edges[c]
        path.extend(open_at(local_tours[c].order, entry, exit_))
    order = np.array(path, dtype=np.int64)
    return Tour(order, float(dist[order, np.roll(order, -1)].sum()))


def stitch_length(plan: StitchPlan, local_tours: dict[int, Tour], dist: np.ndarray) -> float:
    """Joined length predicted from the parts: local lengths minus pseudo-edges plus bridges."""
    if len(plan.class_order) == 1:
        return local_tours[plan.class_order[0]].length
    total = 0.0
    for c in plan.class_order:
        u, v = plan.pseudo_edges[c]
        t = local_tours[c]
        total += t.length - (dist[u, v] if len(t) > 1 else 0.0)
    total += sum(dist[b.a, b.b] for b in plan.bridges)
    return float(total)


def segments_intersect(a1, a2, b1, b2) -> bool:
    """True when segments a1-a2 and b1-b2 cross or touch; a shared endpoint alone does not count."""
    return bool(_segments_intersect_scalar(float(a1[0]), float(a1[1]), float(a2[0]), float(a2[1]),
                                           float(b1[0]), float(b1[1]), float(b2[0]), float(b2[1])))


def remove_cross_edges(tour: Tour, coords: np.ndarray, max_passes: int = 10,
                       dist: np.ndarray | None = None) -> Tour:
    """Uncross the tour geometrically; ``length`` is re-measured with ``dist`` (exact when omitted)."""
    exact = distance_matrix(coords, EdgeWeightType.EUC_2D_EXACT)
    order, _, _, converged = uncross(tour.order, coords, exact, max_passes)
    if not converged:
        log.warning("cross-edge removal stopped at the %d-pass cap", max_passes)
    d = exact if dist is None else dist
    return Tour(order, float(d[order, np.roll(order, -1)].sum()), tour.iterations, tour.window_fallbacks)


def partition(instance: Instance, algorithm: Algorithm, config: SolverConfig,
              seeds: SeedSet | None, rng: np.random.Generator) -> tuple[list[ClassState], list[str]]:
    coords = instance.coords
    cc = config.cluster
    notes = []
    if seeds is not None:
        m0 = len(seeds)
    else:
        m0 = cc.m0 if cc.m0 is not None else default_m0(instance.n)
        if cc.m0 is None:
            notes.append(f"m0 defaulted to {m0} (no seed file)")
    centroids = seeds.centroids if seeds is not None else None
    if algorithm is Algorithm.ACO_KMEANS:
        notes.append("K-Means baseline partition (no compact extraction)")
        return kmeans(coords, np.arange(instance.n), m0, centroids, rng), notes
    if algorithm is Algorithm.ACO_SLC_MIXTURE:
        cfg = ClusterConfig(m0, cc.epsilon, cc.sector_floor, cc.trace_threshold, cc.merge_factor,
                            cc.seed, cc.max_sweeps)
        res = slc_mixture(coords, None, cfg, centroids, rng)
        if res.slc.capped:
            notes.append("clustering hit the sweep cap")
        return res.classes, notes
    res = slc(coords, None, m0, cc.epsilon, centroids, rng=rng, max_sweeps=cc.max_sweeps)
    if res.capped:
        notes.append("clustering hit the sweep cap")
    return res.classes, notes


def solve(instance: Instance, algorithm: Algorithm | str = Algorithm.ACO_SLC,
          config: SolverConfig | None = None, seeds: SeedSet | None = None) -> SolveResult:
    """Run one of the five algorithms; every stochastic choice flows from ``config.aco.seed``."""
    algorithm = Algorithm.parse(algorithm) if isinstance(algorithm, str) else algorithm
    config = config or SolverConfig()
    dist = instance.distance_matrix()
    rng = np.random.default_rng(config.aco.seed)
    timings = {k: 0.0 for k in ("clustering", "ordering", "bridging", "class_solve", "stitching", "repair")}
    t_start = time.perf_counter()

    if algorithm is Algorithm.ACO:
        try:
            t0 = time.perf_counter()
            tour = run_aco(dist, config.aco, rng=rng)
            timings["class_solve"] = time.perf_counter() - t0
        except Exception as exc:
            raise PipelineError("aco", exc) from exc
        timings["total"] = time.perf_counter() - t_start
        return SolveResult(tour, algorithm, timings)

    windows = algorithm in (Algorithm.ACO_SLC_LWCR, Algorithm.ACO_SLC_MIXTURE)
    phase = "clustering"
    try:
        t0 = time.perf_counter()
        classes, notes = partition(instance, algorithm, config, seeds, rng)
        timings["clustering"] = time.perf_counter() - t0

        phase = "ordering"
        t0 = time.perf_counter()
        graph = build_centroid_graph(classes, dist)
        class_order = order_classes(graph, config.aco, rng)
        timings["ordering"] = time.perf_counter() - t0

        phase = "bridging"
        t0 = time.perf_counter()
        plan = make_plan(classes, class_order, dist)
        if plan.reused_borders:
            notes.append(f"{plan.reused_borders} bridge(s) reused a border city")
        timings["bridging"] = time.perf_counter() - t0

        phase = "class_solve"
        t0 = time.perf_counter()
        local: dict[int, Tour] = {}
        for c in plan.class_order:
            members = classes[c].members
            if len(plan.class_order) == 1:
                sub = dist[np.ix_(members, members)]
                w = build_windows(sub, little_window_size(len(members))) if windows and len(members) > 2 else None
                t = run_aco(sub, config.aco, windows=w, rng=rng)
                local[c] = Tour(members[t.order], t.length)
            else:
                u, v = plan.pseudo_edges[c]
                local[c] = solve_class(members, u, v, dist, config.aco, windows, rng)
            if config.uncross_per_class and windows and len(members) > 3:
                u_v = plan.pseudo_edges.get(c)
                fixed = remove_cross_edges(local[c], instance.coords, config.uncross_passes, dist)
                if u_v is None or fixed.has_edge(*u_v):
                    local[c] = fixed
        timings["class_solve"] = time.perf_counter() - t0

        phase = "stitching"
        t0 = time.perf_counter()
        tour = join_routes(plan, local, dist)
        timings["stitching"] = time.perf_counter() - t0

        if windows:
            phase = "repair"
            t0 = time.perf_counter()
            tour = remove_cross_edges(tour, instance.coords, config.uncross_passes, dist)
            timings["repair"] = time.perf_counter() - t0
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(phase, exc) from exc
    timings["total"] = time.perf_counter() - t_start
    return SolveResult(tour, algorithm, timings, classes, plan, notes)


def format_tour(instance: Instance, tour: Tour, algorithm: str = "") -> str:
    """TSPLIB TOUR file (1-based ids) followed by a ``LENGTH`` sidecar line."""
    body = "\n".join(str(int(i) + 1) for i in tour.order)
    comment = f"COMMENT: {algorithm}\n" if algorithm else ""
    return (f"NAME: {instance.name}.tour\nTYPE: TOUR\n{comment}DIMENSION: {len(tour)}\n"
            f"TOUR_SECTION\n{body}\n-1\nEOF\n"
            f"LENGTH: {tour.length:g} DISTANCE: {instance.edge_weight_type.value}\n")


def parse_tour(text: str) -> tuple[np.ndarray, float | None]:
    ids, length, in_section = [], None, False
    for line in text.splitlines():
        s = line.strip()
        if s == "TOUR_SECTION":
            in_section = True
        elif in_section:
            if s == "-1":
                in_section = False
            elif s:
                ids.append(int(s) - 1)
        elif s.startswith("LENGTH:"):
            length = float(s.split()[1])
    return np.array(ids, dtype=np.int64), length
