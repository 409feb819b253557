"""Local clustering with compact-region extraction (SLC) and the mixture variant.

All functions work on a global ``coords`` array of shape ``(N, 2)`` and on
integer city ids indexing into it.  Every operation that returns classes
returns a partition of the ids it was given.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np


class Shape(str, enum.Enum):
    UNKNOWN = "UNKNOWN"
    SPHERICAL = "SPHERICAL"
    CHAIN = "CHAIN"
    ISOLATED = "ISOLATED"


@dataclass
class ClassState:
    members: np.ndarray
    points: np.ndarray
    centroid: np.ndarray
    distortion: float = 0.0
    deviation: float = 0.0
    entropy: float = 0.0
    stable: bool = False
    shape: Shape = Shape.UNKNOWN

    @classmethod
    def of(cls, members, coords: np.ndarray, centroid=None, shape: Shape = Shape.UNKNOWN) -> "ClassState":
        """Build a class from member ids, filling in the statistics."""
        members = np.asarray(members, dtype=np.int64)
        pts = coords[members]
        if centroid is None:
            centroid = pts.mean(axis=0) if len(members) else np.zeros(2)
        state = cls(members, pts, np.asarray(centroid, dtype=np.float64), shape=shape)
        if len(members):
            state.distortion = distortion(state)
            state.deviation = deviation(state)
            state.entropy = entropy_estimate(state)
        return state

    def __len__(self) -> int:
        return len(self.members)


class EmptyClassError(ValueError):
    pass


@dataclass(frozen=True)
class ClusterConfig:
    m0: int | None = None  # None -> number of seeds, else max(2, round(sqrt(N)))
    epsilon: float = 0.001
    sector_floor: float = 0.058
    trace_threshold: float = 0.0005
    merge_factor: float = 2.0
    seed: int = 0
    max_sweeps: int = 500

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0 < self.sector_floor <= 0.125:
            raise ValueError("sector_floor must lie in (0, 1/8]")
        if self.trace_threshold <= 0:
            raise ValueError("trace_threshold must be positive")
        if self.merge_factor <= 0:
            raise ValueError("merge_factor must be positive")
        if self.m0 is not None and self.m0 < 1:
            raise ValueError("m0 must be at least 1")


def default_m0(n: int) -> int:
    return max(2, round(math.sqrt(n)))


# ---------------------------------------------------------------------------
# per-class statistics
# ---------------------------------------------------------------------------

def _radii(state: ClassState) -> np.ndarray:
    diff = state.points - state.centroid
    return np.sqrt(diff[:, 0] ** 2 + diff[:, 1] ** 2)


def distortion(state: ClassState) -> float:
    """Mean member distance to the centroid."""
    if len(state.members) == 0:
        raise EmptyClassError("distortion of an empty class")
    return float(_radii(state).mean())


def deviation(state: ClassState) -> float:
    """Mean absolute difference between member radius and the distortion."""
    if len(state.members) == 0:
        raise EmptyClassError("deviation of an empty class")
    r = _radii(state)
    return float(np.abs(r - r.mean()).mean())


def entropy_estimate(state: ClassState) -> float:
    if len(state.members) == 0:
        raise EmptyClassError("entropy of an empty class")
    return math.log2(len(state.members))


def entropy_converged(h_prev: float, h_next: float, epsilon: float) -> bool:
    """Relative entropy change below ``epsilon``; a zero previous entropy converges only to zero."""
    if h_prev == 0:
        return h_next == 0
    return abs(h_prev - h_next) / h_prev < epsilon


def compact_region(state: ClassState, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Split members into those within ``(D + 3*delta) / 4**p`` of the centroid and the rest."""
    if p < 0:
        raise ValueError("p must be non-negative")
    if len(state.members) == 0:
        return state.members.copy(), state.members.copy()
    r = _radii(state)
    radius = (r.mean() + 3.0 * np.abs(r - r.mean()).mean()) / 4.0 ** p
    inside = r <= radius
    return state.members[inside], state.members[~inside]


# ---------------------------------------------------------------------------
# K-Means style iteration
# ---------------------------------------------------------------------------

def nearest_centroid(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    d2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
    return np.argmin(d2, axis=1)  # first minimum -> lowest class index


def _means(points: np.ndarray, labels: np.ndarray, old: np.ndarray) -> np.ndarray:
    k = len(old)
    counts = np.bincount(labels, minlength=k)
    sx = np.bincount(labels, weights=points[:, 0], minlength=k)
    sy = np.bincount(labels, weights=points[:, 1], minlength=k)
    out = old.copy()
    nz = counts > 0
    out[nz, 0] = sx[nz] / counts[nz]
    out[nz, 1] = sy[nz] / counts[nz]
    return out


def assign_and_update(coords: np.ndarray, ids, classes: Sequence[ClassState]) -> list[ClassState]:
    """One K-Means sweep: assign ``ids`` to the nearest class centroid, then move centroids to member means."""
    ids = np.asarray(ids, dtype=np.int64)
    cents = np.array([c.centroid for c in classes], dtype=np.float64).reshape(-1, 2)
    labels = nearest_centroid(coords[ids], cents)
    new = _means(coords[ids], labels, cents)
    return [ClassState.of(ids[labels == i], coords, new[i]) for i in range(len(cents))]


def kmeans(coords: np.ndarray, ids, k: int, centroids: np.ndarray | None = None,
           rng: np.random.Generator | None = None, max_iter: int = 300) -> list[ClassState]:
    """Plain Lloyd iteration until assignments stop changing; empty classes are dropped."""
    ids = np.asarray(ids, dtype=np.int64)
    pts = coords[ids]
    if centroids is None:
        rng = rng if rng is not None else np.random.default_rng(0)
        centroids = pts[rng.choice(len(ids), size=min(k, len(ids)), replace=False)]
    cents = np.array(centroids, dtype=np.float64).reshape(-1, 2)
    labels = nearest_centroid(pts, cents)
    for _ in range(max_iter):
        cents = _means(pts, labels, cents)
        new = nearest_centroid(pts, cents)
        if np.array_equal(new, labels):
            break
        labels = new
    return [ClassState.of(ids[labels == i], coords) for i in range(len(cents)) if (labels == i).any()]


# ---------------------------------------------------------------------------
# local clustering with compact-region extraction
# ---------------------------------------------------------------------------

class LocalClusterResult(NamedTuple):
    extracted: list[ClassState]
    residual: np.ndarray
    capped: bool
    sweeps: int


def _sizes_converged(prev: np.ndarray, new: np.ndarray, epsilon: float) -> np.ndarray:
    out = np.zeros(len(new), dtype=bool)
    for i, (a, b) in enumerate(zip(prev, new)):
        if a == 0 or b == 0:
            out[i] = a == b
        else:
            out[i] = entropy_converged(math.log2(a), math.log2(b), epsilon)
    return out


def local_cluster_3delta(coords: np.ndarray, ids, m: int, epsilon: float, centroids=None, p: int = 0,
                         rng: np.random.Generator | None = None, max_sweeps: int = 500) -> LocalClusterResult:
    """Cluster ``ids`` into ``m`` classes, peeling off each class once its size settles.

    A class is stable when the relative change of ``log2 |class|`` between two
    sweeps drops below ``epsilon``.  Its compact central region becomes an
    extracted class, its fringe joins the residual, and the class leaves the
    training set.  After ``max_sweeps`` sweeps all live classes are forced
    stable and the result is flagged ``capped``.
    """
    ids = np.asarray(ids, dtype=np.int64)
    if m < 1:
        raise ValueError("m must be at least 1")
    if m > len(ids):
        raise ValueError(f"m={m} exceeds the {len(ids)} points to cluster")
    if p < 0:
        raise ValueError("p must be non-negative")
    if centroids is None:
        rng = rng if rng is not None else np.random.default_rng(0)
        centroids = coords[ids[rng.choice(len(ids), size=m, replace=False)]]
    cents = np.array(centroids, dtype=np.float64).reshape(-1, 2)
    if len(cents) != m:
        raise ValueError(f"expected {m} initial centroids, got {len(cents)}")

    live_ids = ids
    pts = coords[live_ids]
    labels = nearest_centroid(pts, cents)
    sizes = np.bincount(labels, minlength=len(cents))
    extracted: list[ClassState] = []
    residual: list[np.ndarray] = []
    sweeps = 0
    capped = False
    while len(cents) > 0:
        if sweeps >= max_sweeps:
            capped = True
            stable = np.ones(len(cents), dtype=bool)
        else:
            cents = _means(pts, labels, cents)
            labels = nearest_centroid(pts, cents)
            new_sizes = np.bincount(labels, minlength=len(cents))
            stable = _sizes_converged(sizes, new_sizes, epsilon)
            sizes = new_sizes
            sweeps += 1
        if not stable.any():
            continue
        for i in np.flatnonzero(stable):
            members = live_ids[labels == i]
            if len(members) == 0:
                continue
            state = ClassState.of(members, coords)
            kept, spilled = compact_region(state, p)
            if len(kept):
                extracted.append(ClassState.of(kept, coords))
            if len(spilled):
                residual.append(spilled)
        # drop stable classes and re-pack the survivors
        keep_pts = ~stable[labels]
        remap = np.cumsum(~stable) - 1
        live_ids = live_ids[keep_pts]
        pts = pts[keep_pts]
        labels = remap[labels[keep_pts]]
        cents = cents[~stable]
        sizes = sizes[~stable]
    res = np.sort(np.concatenate(residual)) if residual else np.empty(0, dtype=np.int64)
    return LocalClusterResult(extracted, res, capped, sweeps)


class SlcResult(NamedTuple):
    num: int
    classes: list[ClassState]
    rounds: int
    capped: bool


def slc(coords: np.ndarray, ids=None, m0: int = 2, epsilon: float = 0.001, seeds=None,
        rng: np.random.Generator | None = None, max_sweeps: int = 500) -> SlcResult:
    """Special local clustering: ``floor(log2 m0)`` rounds of compact extraction.

    Round r clusters what earlier rounds left over, with ``m0 >> r`` classes
    and the extraction radius shrunk by ``4**r``.  ``seeds`` (if given) seed the
    first round; later rounds draw their initial centroids from the leftover
    points.  Whatever remains at the end becomes singleton classes.
    """
    ids = np.arange(len(coords), dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64)
    if seeds is not None:
        seeds = np.asarray(getattr(seeds, "centroids", seeds), dtype=np.float64).reshape(-1, 2)
        m0 = len(seeds)
    if m0 < 1:
        raise ValueError("m0 must be at least 1")
    rng = rng if rng is not None else np.random.default_rng(0)
    rounds = int(m0).bit_length() - 1
    remaining = ids
    classes: list[ClassState] = []
    m = m0
    p = 0
    capped = False
    done = 0
    for r in range(rounds):
        if len(remaining) == 0:
            break
        if r == 0 and seeds is not None:
            res = local_cluster_3delta(coords, remaining, m, epsilon, seeds, p, max_sweeps=max_sweeps)
        else:
            mm = min(m, len(remaining))
            res = local_cluster_3delta(coords, remaining, mm, epsilon, None, p, rng=rng, max_sweeps=max_sweeps)
        classes.extend(res.extracted)
        remaining = res.residual
        capped |= res.capped
        m //= 2
        p += 1
        done += 1
    classes.extend(ClassState.of([i], coords) for i in remaining)
    return SlcResult(len(classes), classes, done, capped)


# ---------------------------------------------------------------------------
# shape marker
# ---------------------------------------------------------------------------

def octants(dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Index of the 45-degree sector ``[45k, 45(k+1))`` containing each offset.

    Computed with sign swaps and one comparison, so boundary points land in
    the counterclockwise-next sector exactly.  A zero offset maps to sector 0.
    """
    dx = np.asarray(dx, dtype=np.float64)
    dy = np.asarray(dy, dtype=np.float64)
    q = np.zeros(dx.shape, dtype=np.int64)
    q[(dx <= 0) & (dy > 0)] = 1
    q[(dx < 0) & (dy <= 0)] = 2
    q[(dx >= 0) & (dy < 0)] = 3
    # rotate each quadrant onto the first one: x > 0, y >= 0
    rx = np.select([q == 0, q == 1, q == 2, q == 3], [dx, dy, -dx, -dy])
    ry = np.select([q == 0, q == 1, q == 2, q == 3], [dy, -dx, -dy, dx])
    out = 2 * q + (ry >= rx)
    out[(dx == 0) & (dy == 0)] = 0
    return out


def sector_percentages(state: ClassState) -> np.ndarray:
    if len(state.members) == 0:
        raise EmptyClassError("sector percentages of an empty class")
    diff = state.points - state.centroid
    counts = np.bincount(octants(diff[:, 0], diff[:, 1]), minlength=8)
    return counts / counts.sum()


def is_spherical(state: ClassState, sector_floor: float = 0.058) -> bool:
    """All eight sectors hold at least ``sector_floor`` of the members (classes under 8 members never do)."""
    if len(state.members) < 8:
        return False
    return bool(sector_percentages(state).min() >= sector_floor)


# ---------------------------------------------------------------------------
# chain-shaped clustering
# ---------------------------------------------------------------------------

class ChainResult(NamedTuple):
    chains: list[ClassState]
    isolated: list[ClassState]
    segments: list[np.ndarray]


def normalize_unit(points: np.ndarray) -> np.ndarray:
    """Shift to the origin and divide by the larger side of the bounding box."""
    lo = points.min(axis=0)
    span = float((points.max(axis=0) - lo).max())
    return (points - lo) / (span if span > 0 else 1.0)


def covariance_trace(points: np.ndarray) -> float:
    """Trace of the population (1/n) covariance matrix."""
    return float(points.var(axis=0).sum())


def _grow_segments(pts: np.ndarray, trace_threshold: float) -> list[np.ndarray]:
    n = len(pts)
    remaining = np.ones(n, dtype=bool)
    segments = []
    while remaining.any():
        idx = np.flatnonzero(remaining)
        c = pts[idx].mean(axis=0)
        far = np.sqrt(((pts[idx] - c) ** 2).sum(axis=1))
        seed = int(idx[np.argmax(far)])
        members = [seed]
        remaining[seed] = False
        sx, sy = pts[seed]
        sxx, syy = sx * sx, sy * sy
        near = np.sqrt(((pts - pts[seed]) ** 2).sum(axis=1))
        near[~remaining] = np.inf
        while remaining.any():
            j = int(np.argmin(near))
            x, y = pts[j]
            k = len(members) + 1
            mx, my = (sx + x) / k, (sy + y) / k
            trace = (sxx + x * x) / k - mx * mx + (syy + y * y) / k - my * my
            if trace > trace_threshold:
                break
            members.append(j)
            remaining[j] = False
            sx += x
            sy += y
            sxx += x * x
            syy += y * y
            near = np.minimum(near, np.sqrt(((pts - pts[j]) ** 2).sum(axis=1)))
            near[~remaining] = np.inf
        segments.append(np.array(members, dtype=np.int64))
    return segments


def _components(adj: np.ndarray) -> list[list[int]]:
    n = len(adj)
    seen = np.zeros(n, dtype=bool)
    groups = []
    for s in range(n):
        if seen[s]:
            continue
        stack, group = [s], []
        seen[s] = True
        while stack:
            a = stack.pop()
            group.append(a)
            for b in np.flatnonzero(adj[a] & ~seen):
                seen[b] = True
                stack.append(int(b))
        groups.append(sorted(group))
    return groups


def chain_cluster(coords: np.ndarray, ids, trace_threshold: float = 0.0005,
                  merge_factor: float = 2.0) -> ChainResult:
    """Grow compact segments seed-first under a covariance-trace cap, then merge touching segments.

    Coordinates are normalized to the unit square first.  Two segments are
    neighbors when their closest points are within ``merge_factor`` times the
    mean nearest-neighbor distance of the whole input; neighbors merge
    transitively.  Merged groups of one point are ISOLATED.
    """
    ids = np.asarray(ids, dtype=np.int64)
    if len(ids) == 0:
        raise ValueError("chain_cluster needs at least one point")
    if len(ids) == 1:
        return ChainResult([], [ClassState.of(ids, coords, shape=Shape.ISOLATED)], [ids.copy()])
    pts = normalize_unit(coords[ids])
    segs = _grow_segments(pts, trace_threshold)

    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
    np.fill_diagonal(d, np.inf)
    radius = merge_factor * float(d.min(axis=1).mean())
    label = np.empty(len(ids), dtype=np.int64)
    for s, members in enumerate(segs):
        label[members] = s
    onehot = np.zeros((len(ids), len(segs)))
    onehot[np.arange(len(ids)), label] = 1.0
    adj = (onehot.T @ (d <= radius).astype(float) @ onehot) > 0
    chains, isolated = [], []
    for group in _components(adj):
        local = np.sort(np.concatenate([segs[g] for g in group]))
        members = ids[local]
        if len(members) == 1:
            isolated.append(ClassState.of(members, coords, shape=Shape.ISOLATED))
        else:
            chains.append(ClassState.of(members, coords, shape=Shape.CHAIN))
    return ChainResult(chains, isolated, [ids[s] for s in segs])


class MixtureResult(NamedTuple):
    classes: list[ClassState]
    slc: SlcResult
    chain: ChainResult | None


def slc_mixture(coords: np.ndarray, ids=None, config: ClusterConfig | None = None, seeds=None,
                rng: np.random.Generator | None = None) -> MixtureResult:
    """SLC, keep the spherical classes, chain-cluster everything else."""
    config = config or ClusterConfig()
    ids = np.arange(len(coords), dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64)
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    m0 = config.m0 if config.m0 is not None else default_m0(len(ids))
    base = slc(coords, ids, m0, config.epsilon, seeds, rng=rng, max_sweeps=config.max_sweeps)
    out: list[ClassState] = []
    rest: list[np.ndarray] = []
    for c in base.classes:
        if is_spherical(c, config.sector_floor):
            out.append(replace(c, shape=Shape.SPHERICAL))
        else:
            rest.append(c.members)
    chain = None
    if rest:
        chain = chain_cluster(coords, np.sort(np.concatenate(rest)), config.trace_threshold, config.merge_factor)
        out.extend(chain.chains)
        out.extend(chain.isolated)
    return MixtureResult(out, base, chain)


# ---------------------------------------------------------------------------
# partition dump
# ---------------------------------------------------------------------------

def format_partition(classes: Sequence[ClassState]) -> str:
    """One tab-separated line per class: label, shape, member ids, centroid x y."""
    lines = []
    for k, c in enumerate(classes):
        ids = " ".join(str(int(i)) for i in c.members)
        lines.append(f"{k}\t{Shape(c.shape).value}\t{ids}\t{float(c.centroid[0])!r} {float(c.centroid[1])!r}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_partition(text: str, coords: np.ndarray) -> list[ClassState]:
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        _, shape, ids, cen = line.split("\t")
        members = np.array([int(t) for t in ids.split()], dtype=np.int64)
        cx, cy = (float(t) for t in cen.split())
        out.append(ClassState.of(members, coords, np.array([cx, cy]), Shape(shape)))
    return out
