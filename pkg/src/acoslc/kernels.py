"""Hot inner loops: ant tour construction and 2-opt uncrossing.

Each kernel has two implementations with identical results:

* a scalar loop compiled with ``numba.njit`` (the default when numba imports);
* a vectorized numpy version, used when ``ACOSLC_USE_NUMBA=0`` is set or numba
  is unavailable.

Randomness never enters a kernel.  Callers draw uniforms from a seeded
``numpy.random.Generator`` and pass them in, so both paths see the same
stream and reproduce each other bit for bit.
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get("ACOSLC_USE_NUMBA", "1").lower() not in ("0", "false", "no")


def _njit(fn):
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# ---------------------------------------------------------------------------
# tour construction
# ---------------------------------------------------------------------------

def _construct_tours_loop(weights, dist, uniforms, windows, forced_u, forced_v, tours):
    m, n = tours.shape
    w = windows.shape[1]
    visited = np.zeros(n, dtype=np.bool_)
    fallbacks = 0
    for k in range(m):
        visited[:] = False
        start = int(uniforms[k, 0] * n)
        if start >= n:
            start = n - 1
        tours[k, 0] = start
        visited[start] = True
        cur = start
        for step in range(1, n):
            nxt = -1
            if forced_u >= 0:
                if cur == forced_u and not visited[forced_v]:
                    nxt = forced_v
                elif cur == forced_v and not visited[forced_u]:
                    nxt = forced_u
            if nxt < 0:
                windowed = False
                if w > 0:
                    for c in range(w):
                        if not visited[windows[cur, c]]:
                            windowed = True
                            break
                    if not windowed:
                        fallbacks += 1
                total = 0.0
                if windowed:
                    for c in range(w):
                        j = windows[cur, c]
                        if not visited[j]:
                            total += weights[cur, j]
                else:
                    for j in range(n):
                        if not visited[j]:
                            total += weights[cur, j]
                r = uniforms[k, step] * total
                acc = 0.0
                last_pos = -1
                if windowed:
                    for c in range(w):
                        j = windows[cur, c]
                        if not visited[j]:
                            acc += weights[cur, j]
                            if weights[cur, j] > 0.0:
                                last_pos = j
                            if acc > r:
                                nxt = j
                                break
                else:
                    for j in range(n):
                        if not visited[j]:
                            acc += weights[cur, j]
                            if weights[cur, j] > 0.0:
                                last_pos = j
                            if acc > r:
                                nxt = j
                                break
                if nxt < 0:
                    if last_pos >= 0:
                        nxt = last_pos
                    else:
                        # every weight underflowed: go to the nearest candidate
                        best = np.inf
                        if windowed:
                            for c in range(w):
                                j = windows[cur, c]
                                if not visited[j] and dist[cur, j] < best:
                                    best = dist[cur, j]
                                    nxt = j
                        else:
                            for j in range(n):
                                if not visited[j] and dist[cur, j] < best:
                                    best = dist[cur, j]
                                    nxt = j
                        if nxt < 0:
                            for j in range(n):
                                if not visited[j]:
                                    nxt = j
                                    break
            tours[k, step] = nxt
            visited[nxt] = True
            cur = nxt
    return fallbacks


_construct_tours_nb = _njit(_construct_tours_loop)


def _construct_tours_np(weights, dist, uniforms, windows, forced_u, forced_v, tours):
    m, n = tours.shape
    w = windows.shape[1]
    rows = np.arange(m)
    visited = np.zeros((m, n), dtype=bool)
    start = np.minimum((uniforms[:, 0] * n).astype(np.int64), n - 1)
    tours[:, 0] = start
    visited[rows, start] = True
    cur = start
    fallbacks = 0
    if w > 0:
        in_window = np.zeros((n, n), dtype=bool)
        in_window[np.arange(n)[:, None], windows] = True
    for step in range(1, n):
        free = ~visited
        cand = free
        if forced_u >= 0:
            fu = (cur == forced_u) & free[:, forced_v]
            fv = (cur == forced_v) & free[:, forced_u]
        if w > 0:
            win = in_window[cur] & free
            has = win.any(axis=1)
            if forced_u >= 0:
                fallbacks += int((~has & ~fu & ~fv).sum())
            else:
                fallbacks += int((~has).sum())
            cand = np.where(has[:, None], win, free)
        vals = np.where(cand, weights[cur], 0.0)
        cum = np.cumsum(vals, axis=1)
        r = uniforms[:, step] * cum[:, -1]
        above = cum > r[:, None]
        nxt = np.argmax(above, axis=1)
        miss = ~above.any(axis=1)
        if miss.any():
            pos = vals[miss] > 0.0
            has_pos = pos.any(axis=1)
            last_pos = n - 1 - np.argmax(pos[:, ::-1], axis=1)
            nearest = np.argmin(np.where(cand[miss], dist[cur[miss]], np.inf), axis=1)
            nxt[miss] = np.where(has_pos, last_pos, nearest)
        if forced_u >= 0:
            nxt[fu] = forced_v
            nxt[fv] = forced_u
        tours[:, step] = nxt
        visited[rows, nxt] = True
        cur = nxt
    return fallbacks


def construct_tours(weights: np.ndarray, dist: np.ndarray, uniforms: np.ndarray,
                    windows: np.ndarray | None = None, forced_edge: tuple[int, int] | None = None,
                    use_numba: bool | None = None) -> tuple[np.ndarray, int]:
    """Build ``len(uniforms)`` ant tours by roulette selection over ``weights``.

    ``weights[i, j]`` is the unnormalized attractiveness of moving from i to j.
    ``uniforms`` has shape ``(m, n)``: column 0 picks the start city, column s
    the s-th move.  ``windows`` restricts candidates to each city's window
    members (widened to all unvisited cities when none is left; such events are
    counted and returned).  A forced edge ``(u, v)`` is always taken when the
    ant stands on one end and the other is still unvisited.
    """
    m, n = uniforms.shape
    if windows is None:
        windows = np.zeros((n, 0), dtype=np.int64)
    else:
        # kernels scan candidates in city-index order
        windows = np.sort(np.asarray(windows, dtype=np.int64), axis=1)
    fu, fv = forced_edge if forced_edge is not None else (-1, -1)
    tours = np.empty((m, n), dtype=np.int64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    dist = np.ascontiguousarray(dist, dtype=np.float64)
    uniforms = np.ascontiguousarray(uniforms, dtype=np.float64)
    use_numba = USE_NUMBA if use_numba is None else (use_numba and HAVE_NUMBA)
    impl = _construct_tours_nb if use_numba else _construct_tours_np
    fallbacks = impl(weights, dist, uniforms, windows, int(fu), int(fv), tours)
    return tours, int(fallbacks)


# ---------------------------------------------------------------------------
# tour lengths and pheromone deposit
# ---------------------------------------------------------------------------

def _lengths_loop(tours, dist, out):
    m, n = tours.shape
    for k in range(m):
        acc = 0.0
        for i in range(n):
            j = i + 1 if i + 1 < n else 0
            acc += dist[tours[k, i], tours[k, j]]
        out[k] = acc


def _lengths_np(tours, dist, out):
    # cumsum accumulates left to right, like the loop
    out[:] = np.cumsum(dist[tours, np.roll(tours, -1, axis=1)], axis=1)[:, -1]


def _deposit_loop(tau, tours, lengths, rho, q, floor):
    m, n = tours.shape
    size = tau.shape[0]
    acc = np.zeros((size, size))
    for k in range(m):
        dep = q / max(lengths[k], floor)
        for i in range(n):
            a = tours[k, i]
            b = tours[k, i + 1 if i + 1 < n else 0]
            acc[a, b] += dep
            acc[b, a] += dep
    keep = 1.0 - rho
    for i in range(size):
        for j in range(size):
            v = tau[i, j] * keep + acc[i, j]
            tau[i, j] = v if v > floor else floor


def _deposit_np(tau, tours, lengths, rho, q, floor):
    m, n = tours.shape
    size = tau.shape[0]
    dep = np.repeat(q / np.maximum(lengths, floor), n)
    a = tours.ravel()
    b = np.roll(tours, -1, axis=1).ravel()
    # interleave (a, b) and (b, a) so each bin sums in the loop's order
    idx = np.stack([a * size + b, b * size + a], axis=1).ravel()
    acc = np.bincount(idx, weights=np.repeat(dep, 2), minlength=size * size).reshape(size, size)
    v = tau * (1.0 - rho) + acc
    np.maximum(v, floor, out=tau)


_lengths_nb = _njit(_lengths_loop)
_deposit_nb = _njit(_deposit_loop)


def tour_lengths(tours: np.ndarray, dist: np.ndarray, use_numba: bool | None = None) -> np.ndarray:
    """Cycle length of every row of ``tours`` (closing edge included)."""
    tours = np.ascontiguousarray(np.atleast_2d(tours), dtype=np.int64)
    out = np.empty(tours.shape[0])
    if tours.shape[1] == 0:
        return np.zeros(tours.shape[0])
    use_numba = USE_NUMBA if use_numba is None else (use_numba and HAVE_NUMBA)
    (_lengths_nb if use_numba else _lengths_np)(tours, np.ascontiguousarray(dist, dtype=np.float64), out)
    return out


def deposit(tau: np.ndarray, tours: np.ndarray, lengths: np.ndarray, rho: float, q: float,
            floor: float, use_numba: bool | None = None) -> None:
    """In place: ``tau <- max((1 - rho) * tau + sum_k Q / L_k on both directions of k's edges, floor)``."""
    tours = np.ascontiguousarray(np.atleast_2d(tours), dtype=np.int64)
    lengths = np.ascontiguousarray(np.atleast_1d(lengths), dtype=np.float64)
    use_numba = USE_NUMBA if use_numba is None else (use_numba and HAVE_NUMBA)
    (_deposit_nb if use_numba else _deposit_np)(tau, tours, lengths, float(rho), float(q), float(floor))


# ---------------------------------------------------------------------------
# segment intersection and uncrossing
# ---------------------------------------------------------------------------

def _orient(px, py, qx, qy, rx, ry):
    return (qx - px) * (ry - py) - (qy - py) * (rx - px)


def _segments_intersect_scalar(ax, ay, bx, by, cx, cy, dx, dy):
    # endpoints shared by coordinates never count (adjacent tour edges)
    if (ax == cx and ay == cy) or (ax == dx and ay == dy) or \
            (bx == cx and by == cy) or (bx == dx and by == dy):
        return False
    o1 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    o2 = (bx - ax) * (dy - ay) - (by - ay) * (dx - ax)
    o3 = (dx - cx) * (ay - cy) - (dy - cy) * (ax - cx)
    o4 = (dx - cx) * (by - cy) - (dy - cy) * (bx - cx)
    if ((o1 > 0 and o2 < 0) or (o1 < 0 and o2 > 0)) and ((o3 > 0 and o4 < 0) or (o3 < 0 and o4 > 0)):
        return True
    if o1 == 0 and min(ax, bx) <= cx <= max(ax, bx) and min(ay, by) <= cy <= max(ay, by):
        return True
    if o2 == 0 and min(ax, bx) <= dx <= max(ax, bx) and min(ay, by) <= dy <= max(ay, by):
        return True
    if o3 == 0 and min(cx, dx) <= ax <= max(cx, dx) and min(cy, dy) <= ay <= max(cy, dy):
        return True
    if o4 == 0 and min(cx, dx) <= bx <= max(cx, dx) and min(cy, dy) <= by <= max(cy, dy):
        return True
    return False


_seg_jit = _njit(_segments_intersect_scalar)


def _segments_intersect_vec(ax, ay, bx, by, cx, cy, dx, dy):
    """``_segments_intersect_scalar`` broadcast over arrays."""
    shared = ((ax == cx) & (ay == cy)) | ((ax == dx) & (ay == dy)) | \
             ((bx == cx) & (by == cy)) | ((bx == dx) & (by == dy))
    o1 = _orient(ax, ay, bx, by, cx, cy)
    o2 = _orient(ax, ay, bx, by, dx, dy)
    o3 = _orient(cx, cy, dx, dy, ax, ay)
    o4 = _orient(cx, cy, dx, dy, bx, by)
    proper = (((o1 > 0) & (o2 < 0)) | ((o1 < 0) & (o2 > 0))) & \
             (((o3 > 0) & (o4 < 0)) | ((o3 < 0) & (o4 > 0)))

    def on(px, py, qx, qy, rx, ry):
        return (np.minimum(px, qx) <= rx) & (rx <= np.maximum(px, qx)) & \
               (np.minimum(py, qy) <= ry) & (ry <= np.maximum(py, qy))

    touch = ((o1 == 0) & on(ax, ay, bx, by, cx, cy)) | ((o2 == 0) & on(ax, ay, bx, by, dx, dy)) | \
            ((o3 == 0) & on(cx, cy, dx, dy, ax, ay)) | ((o4 == 0) & on(cx, cy, dx, dy, bx, by))
    return ~shared & (proper | touch)


def _uncross_loop(tour, xs, ys, dist, max_passes):
    n = tour.shape[0]
    moves = 0
    passes = 0
    converged = False
    move_cap = max_passes * n * n
    while passes < max_passes:
        passes += 1
        improved = False
        for i in range(n - 2):
            j = i + 2
            while j < n:
                if i == 0 and j == n - 1:
                    break
                a = tour[i]
                b = tour[i + 1]
                c = tour[j]
                d = tour[(j + 1) % n]
                if _seg_jit(xs[a], ys[a], xs[b], ys[b], xs[c], ys[c], xs[d], ys[d]):
                    delta = dist[a, c] + dist[b, d] - dist[a, b] - dist[c, d]
                    if delta < 0.0 and moves < move_cap:
                        lo = i + 1
                        hi = j
                        while lo < hi:
                            tmp = tour[lo]
                            tour[lo] = tour[hi]
                            tour[hi] = tmp
                            lo += 1
                            hi -= 1
                        moves += 1
                        improved = True
                        j = i + 2
                        continue
                j += 1
        if not improved:
            converged = True
            break
    return moves, passes, converged


_uncross_nb = _njit(_uncross_loop)


def _uncross_np(tour, xs, ys, dist, max_passes):
    n = tour.shape[0]
    moves = 0
    passes = 0
    converged = False
    move_cap = max_passes * n * n
    while passes < max_passes:
        passes += 1
        improved = False
        for i in range(n - 2):
            lo = i + 2
            while True:
                hi = n - 1 if i == 0 else n  # the edge closing the cycle touches edge 0
                if lo >= hi:
                    break
                j = np.arange(lo, hi)
                a, b = tour[i], tour[i + 1]
                c, d = tour[j], tour[(j + 1) % n]
                cross = _segments_intersect_vec(xs[a], ys[a], xs[b], ys[b], xs[c], ys[c], xs[d], ys[d])
                delta = dist[a, c] + dist[b, d] - dist[a, b] - dist[c, d]
                ok = cross & (delta < 0.0)
                if not ok.any() or moves >= move_cap:
                    break
                jj = int(j[np.argmax(ok)])
                tour[i + 1:jj + 1] = tour[i + 1:jj + 1][::-1].copy()
                moves += 1
                improved = True
        if not improved:
            converged = True
            break
    return moves, passes, converged


def uncross(tour: np.ndarray, coords: np.ndarray, dist: np.ndarray, max_passes: int = 10,
            use_numba: bool | None = None) -> tuple[np.ndarray, int, int, bool]:
    """Apply length-reducing 2-opt moves to intersecting edge pairs.

    Returns ``(tour, moves, passes, converged)``; ``converged`` is False when
    ``max_passes`` ran out while a pass was still making moves.
    """
    tour = np.array(tour, dtype=np.int64)
    if tour.shape[0] < 4:
        return tour, 0, 0, True
    xs = np.ascontiguousarray(coords[:, 0], dtype=np.float64)
    ys = np.ascontiguousarray(coords[:, 1], dtype=np.float64)
    dist = np.ascontiguousarray(dist, dtype=np.float64)
    use_numba = USE_NUMBA if use_numba is None else (use_numba and HAVE_NUMBA)
    impl = _uncross_nb if use_numba else _uncross_np
    moves, passes, converged = impl(tour, xs, ys, dist, int(max_passes))
    return tour, int(moves), int(passes), bool(converged)


def count_crossings(order: np.ndarray, coords: np.ndarray, proper_only: bool = True) -> int:
    """Number of intersecting non-adjacent edge pairs of a cyclic tour."""
    order = np.asarray(order, dtype=np.int64)
    n = len(order)
    if n < 4:
        return 0
    p = coords[order]
    q = coords[np.roll(order, -1)]
    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]
    ax, ay, bx, by = p[i, 0], p[i, 1], q[i, 0], q[i, 1]
    cx, cy, dx, dy = p[j, 0], p[j, 1], q[j, 0], q[j, 1]
    if not proper_only:
        return int(_segments_intersect_vec(ax, ay, bx, by, cx, cy, dx, dy).sum())
    o1 = _orient(ax, ay, bx, by, cx, cy)
    o2 = _orient(ax, ay, bx, by, dx, dy)
    o3 = _orient(cx, cy, dx, dy, ax, ay)
    o4 = _orient(cx, cy, dx, dy, bx, by)
    return int(((o1 * o2 < 0) & (o3 * o4 < 0)).sum())
