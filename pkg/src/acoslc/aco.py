"""Ant-cycle ACO (Dorigo's Ant System) for small symmetric TSP subproblems.

Transition rule: an ant at ``i`` moves to unvisited ``j`` with probability
proportional to ``tau[i, j]**alpha * (1 / d[i, j])**beta``.  After all ants
finish, every trail evaporates by ``rho`` and each ant adds ``Q / L`` to the
edges of its tour.  The run stops at the first iteration whose best length
differs from the previous iteration's best by at most ``epsilon`` (relative),
or after ``t_max`` iterations.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .kernels import construct_tours

TAU_FLOOR = 1e-12
ETA_FLOOR = np.finfo(float).eps


@dataclass(frozen=True)
class AcoParams:
    alpha: float = 1.0
    beta: float = 10.0
    rho: float = 0.4
    q: float = 300.0
    t_max: int = 1000
    epsilon: float = 0.001
    n_ants: int | None = None  # None -> floor(N / 1.5), at least 1
    tau0: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if self.q <= 0:
            raise ValueError("Q must be positive")
        if self.t_max < 1:
            raise ValueError("t_max must be at least 1")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.n_ants is not None and self.n_ants < 1:
            raise ValueError("n_ants must be at least 1")
        if self.tau0 <= 0:
            raise ValueError("tau0 must be positive")

    def ant_count(self, n: int) -> int:
        if self.n_ants is not None:
            return self.n_ants
        return max(1, (2 * n) // 3)


@dataclass
class Tour:
    order: np.ndarray
    length: float
    iterations: int = 0
    window_fallbacks: int = 0

    def __post_init__(self):
        self.order = np.asarray(self.order, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.order)

    def edges(self) -> set[frozenset]:
        o = self.order.tolist()
        if len(o) < 2:
            return set()
        return {frozenset((a, b)) for a, b in zip(o, o[1:] + o[:1])}

    def has_edge(self, u: int, v: int) -> bool:
        o = self.order
        n = len(o)
        if n < 2:
            return False
        pos = np.flatnonzero(o == u)
        if len(pos) == 0:
            return False
        p = int(pos[0])
        return o[(p + 1) % n] == v or o[(p - 1) % n] == v


@dataclass
class PheromoneState:
    tau: np.ndarray
    t: int = 0
    best: Tour | None = None
    iteration_best: list[float] = field(default_factory=list)

    @classmethod
    def initial(cls, n: int, tau0: float = 1.0) -> "PheromoneState":
        tau = np.full((n, n), float(tau0))
        return cls(tau)


def little_window_size(n: int) -> int:
    """Candidate-list width for a city with ``n`` neighbor cities."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if n < 21:
        return min(n - 1, 8)
    if n < 101:
        return min(n - 1, 9)
    if n < 144:
        return min(n - 1, 13)
    if n < 1000:
        return min(n - 1, 19)
    if n < 4000:
        return min(n - 1, 100)
    return n // 10


def build_windows(dist: np.ndarray, w: int) -> np.ndarray:
    """Per city, the ``w`` nearest other cities (ascending distance, ties by id)."""
    n = dist.shape[0]
    if w < 1:
        raise ValueError("window width must be at least 1")
    w = min(w, n - 1)
    d = np.array(dist, dtype=np.float64)
    np.fill_diagonal(d, np.inf)
    return np.argsort(d, axis=1, kind="stable")[:, :w].astype(np.int64)


def heuristic_weights(dist: np.ndarray, beta: float) -> np.ndarray:
    """``eta**beta`` with ``eta = 1/d``; distances are rescaled by their mean first.

    The rescaling multiplies every weight by the same constant, so transition
    probabilities are unchanged while ``d**-beta`` stays inside float range.
    """
    d = np.asarray(dist, dtype=np.float64)
    off = ~np.eye(d.shape[0], dtype=bool)
    pos = d[off & (d > 0)]
    scale = pos.mean() if pos.size else 1.0
    eta = 1.0 / np.maximum(d / scale, ETA_FLOOR)
    out = eta ** beta
    np.fill_diagonal(out, 0.0)
    return out


def tour_lengths(tours: np.ndarray, dist: np.ndarray) -> np.ndarray:
    return kernels.tour_lengths(tours, dist)


def deposit_and_evaporate(state: PheromoneState, tours: np.ndarray, lengths: np.ndarray,
                          params: AcoParams) -> PheromoneState:
    """Evaporate every trail by ``rho``, then add ``Q / L_k`` to both directions of each tour edge."""
    tours = np.atleast_2d(np.asarray(tours, dtype=np.int64))
    if tours.shape[0] == 0:
        raise ValueError("no tours to deposit")
    kernels.deposit(state.tau, tours, lengths, params.rho, params.q, TAU_FLOOR)
    return state


def _transition_weights(tau: np.ndarray, eta_beta: np.ndarray, alpha: float) -> np.ndarray:
    if alpha == 1.0:
        return tau * eta_beta
    return tau ** alpha * eta_beta


def construct_tour(state: PheromoneState, dist: np.ndarray, params: AcoParams,
                   windows: np.ndarray | None = None, forced_edge: tuple[int, int] | None = None,
                   rng: np.random.Generator | None = None) -> Tour:
    """One ant's tour under the current trails."""
    rng = rng if rng is not None else np.random.default_rng(params.seed)
    n = dist.shape[0]
    if n == 1:
        return Tour([0], 0.0)
    weights = _transition_weights(state.tau, heuristic_weights(dist, params.beta), params.alpha)
    tours, fb = construct_tours(weights, dist, rng.random((1, n)), windows, forced_edge)
    order = tours[0]
    if forced_edge is not None:
        order = insert_forced_edge(order, *forced_edge)
    return Tour(order, float(tour_lengths(order[None, :], dist)[0]), window_fallbacks=fb)


def insert_forced_edge(order: np.ndarray, u: int, v: int) -> np.ndarray:
    """Make ``u`` and ``v`` adjacent with one 2-opt reversal if they are not."""
    order = np.asarray(order, dtype=np.int64)
    n = len(order)
    pu = int(np.flatnonzero(order == u)[0])
    rot = np.roll(order, -pu)
    pv = int(np.flatnonzero(rot == v)[0])
    if pv in (1, n - 1):
        return order
    rot[1:pv + 1] = rot[1:pv + 1][::-1].copy()
    return rot


def run_aco(dist: np.ndarray, params: AcoParams | None = None, windows: np.ndarray | None = None,
            forced_edge: tuple[int, int] | None = None, rng: np.random.Generator | None = None,
            callback: Callable[[PheromoneState], None] | None = None) -> Tour:
    """Solve the TSP over the full distance matrix ``dist``.

    ``forced_edge`` names local indices ``(u, v)`` whose edge must appear in the
    result; during construction it costs nothing, in the reported length it
    costs ``dist[u, v]``.  ``callback`` sees the state after every update.
    """
    params = params or AcoParams()
    dist = np.asarray(dist, dtype=np.float64)
    n = dist.shape[0]
    if n == 0:
        raise ValueError("empty subproblem")
    if forced_edge is not None:
        u, v = forced_edge
        if u == v:
            raise ValueError("forced edge must join two distinct cities")
    if n == 1:
        return Tour([0], 0.0)
    if n == 2:
        return Tour([0, 1], float(dist[0, 1] + dist[1, 0]))

    rng = rng if rng is not None else np.random.default_rng(params.seed)
    m = params.ant_count(n)
    state = PheromoneState.initial(n, params.tau0)
    eta_beta = heuristic_weights(dist, params.beta)
    best_order = None
    best_len = np.inf
    prev = None
    fallbacks = 0
    for t in range(1, params.t_max + 1):
        weights = _transition_weights(state.tau, eta_beta, params.alpha)
        tours, fb = construct_tours(weights, dist, rng.random((m, n)), windows, forced_edge)
        fallbacks += fb
        lengths = tour_lengths(tours, dist)
        k = int(np.argmin(lengths))
        lt = float(lengths[k])
        if lt < best_len:
            best_len = lt
            best_order = tours[k].copy()
        deposit_and_evaporate(state, tours, lengths, params)
        state.t = t
        state.iteration_best.append(lt)
        state.best = Tour(best_order, best_len, t)
        if callback is not None:
            callback(state)
        if prev is not None:
            if prev == 0.0:
                if lt == 0.0:
                    break
            elif abs(prev - lt) / prev <= params.epsilon:
                break
        prev = lt

    if forced_edge is not None and not Tour(best_order, best_len).has_edge(*forced_edge):
        best_order = insert_forced_edge(best_order, *forced_edge)
        best_len = float(tour_lengths(best_order[None, :], dist)[0])
    return Tour(best_order, best_len, state.t, fallbacks)
