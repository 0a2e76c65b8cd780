"""Baseline seed selectors: degree, eigenvector, greedy, degree discount, Sigma and Pi.

Every selector breaks ties towards the smallest node id.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .diffusion import DiffusionConfig, derive_seed, estimate_many, estimate_spread
from .graph import Graph

DENSE_CAP = 20000


class SelectionError(ValueError):
    pass


class ConvergenceError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SeedSet:
    nodes: tuple[int, ...]
    origin: str = ""
    params: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)


def _check_budget(g: Graph, k: int) -> None:
    if k < 0 or k > g.n:
        raise SelectionError(f"budget k={k} outside [0, n={g.n}]")


def top_k(scores: np.ndarray, k: int) -> list[int]:
    """Indices of the k largest scores; stable sort keeps ties in id order."""
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")[:k].tolist()


def _lazy_argmax(scores: np.ndarray, k: int, update) -> list[int]:
    """Pick ``k`` nodes by repeatedly taking the best current score.

    ``update(u, scores, chosen)`` rescoring neighbors of each pick; the heap
    holds ``(-score, id)`` so stale entries are skipped and ties go to the
    smaller id.
    """
    heap = [(-float(s), v) for v, s in enumerate(scores)]
    heapq.heapify(heap)
    chosen: list[int] = []
    taken = np.zeros(len(scores), dtype=bool)
    while len(chosen) < k:
        neg, v = heapq.heappop(heap)
        if taken[v] or -neg != scores[v]:
            continue
        taken[v] = True
        chosen.append(v)
        for u in update(v, scores, taken):
            heapq.heappush(heap, (-float(scores[u]), u))
    return chosen


def select_degree(g: Graph, k: int) -> SeedSet:
    """SingleDiscount: take the highest degree, then delete it from the graph."""
    _check_budget(g, k)
    deg = g.degree().astype(np.float64)

    def update(v, scores, taken):
        nbrs = [u for u in g.neighbors(v).tolist() if not taken[u]]
        for u in nbrs:
            scores[u] -= 1.0
        return nbrs

    return SeedSet(tuple(_lazy_argmax(deg, k, update)), "deg")


def degree_discount_score(d: float, t: float, p: float) -> float:
    """Discounted degree of a node with degree ``d`` and ``t`` seeded neighbors."""
    return d - 2 * t - (d - t) * t * p


def select_degree_discount(g: Graph, k: int, p: float | None = None) -> SeedSet:
    """Degree discount with a uniform propagation probability ``p``.

    ``p`` defaults to the mean edge weight.
    """
    _check_budget(g, k)
    if p is None:
        p = float(g.edges()[1].mean()) if g.num_edges else 0.0
    if not 0.0 <= p <= 1.0:
        raise SelectionError("p outside [0, 1]")
    deg = g.degree().astype(np.float64)
    t = np.zeros(g.n)
    scores = deg.copy()

    def update(v, scores, taken):
        nbrs = [u for u in g.neighbors(v).tolist() if not taken[u]]
        for u in nbrs:
            t[u] += 1
            scores[u] = degree_discount_score(deg[u], t[u], p)
        return nbrs

    return SeedSet(tuple(_lazy_argmax(scores, k, update)), "dd", {"p": p})


def eigenvector_centrality(g: Graph, weighted: bool = False, tol: float = 1e-10,
                           max_iter: int = 10000) -> np.ndarray:
    """Power iteration on ``A + I`` (same eigenvectors as ``A``, but no
    oscillation on bipartite graphs), L-inf normalized."""
    a = g.adjacency(weighted=weighted)
    x = np.ones(g.n) / max(g.n, 1)
    for _ in range(max_iter):
        nxt = a @ x + x
        norm = np.max(np.abs(nxt))
        if norm == 0.0:
            return np.zeros(g.n)
        nxt /= norm
        if np.max(np.abs(nxt - x)) < tol:
            return nxt
        x = nxt
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")


def select_eigen(g: Graph, k: int, weighted: bool = False) -> SeedSet:
    _check_budget(g, k)
    return SeedSet(tuple(top_k(eigenvector_centrality(g, weighted), k)), "eig", {"weighted": weighted})


def sigma_scores(g: Graph, t: int = 3) -> np.ndarray:
    """Sum over steps 1..t of ``A^step`` times the all-ones vector."""
    if t < 1:
        raise SelectionError("horizon t must be at least 1")
    a = g.adjacency()
    v = np.ones(g.n)
    total = np.zeros(g.n)
    for _ in range(t):
        v = a @ v
        total += v
    return total


def select_sigma(g: Graph, k: int, t: int = 3) -> SeedSet:
    _check_budget(g, k)
    return SeedSet(tuple(top_k(sigma_scores(g, t), k)), "sigma", {"t": t})


def pi_scores(g: Graph, t: int = 3, dense_cap: int = DENSE_CAP) -> np.ndarray:
    """Row sums of ``J - prod_{step=1..t} (J - A^step)`` with an element-wise product."""
    if t < 1:
        raise SelectionError("horizon t must be at least 1")
    if g.n > dense_cap:
        raise SelectionError(f"Pi needs dense n x n matrices; n={g.n} exceeds cap {dense_cap}")
    a = g.adjacency().toarray()
    power = np.eye(g.n)
    keep = np.ones((g.n, g.n))
    for _ in range(t):
        power = power @ a
        keep *= 1.0 - power
    return (1.0 - keep).sum(axis=1)


def select_pi(g: Graph, k: int, t: int = 3, dense_cap: int = DENSE_CAP) -> SeedSet:
    _check_budget(g, k)
    return SeedSet(tuple(top_k(pi_scores(g, t, dense_cap), k)), "pi", {"t": t})


def select_greedy(g: Graph, k: int, cfg: DiffusionConfig) -> SeedSet:
    """Simulation greedy: add the node with the largest estimated marginal spread.

    Iteration ``j`` estimates every candidate with a stream derived from
    ``(master_seed, j)``; streams are further keyed by the seed set itself.
    """
    _check_budget(g, k)
    chosen: list[int] = []
    for it in range(k):
        it_cfg = cfg.with_seed(derive_seed(cfg.master_seed, "grd", it))
        base = estimate_spread(g, chosen, it_cfg).mean if chosen else 0.0
        taken = set(chosen)
        cands = [v for v in range(g.n) if v not in taken]
        ests = estimate_many(g, [chosen + [v] for v in cands], it_cfg)
        gains = np.array([e.mean - base for e in ests])
        chosen.append(cands[int(np.argmax(gains))])
    return SeedSet(tuple(chosen), "grd", {"rounds": cfg.rounds})


Selector = Callable[..., SeedSet]

SELECTORS: dict[str, Selector] = {
    "deg": select_degree,
    "eig": select_eigen,
    "grd": select_greedy,
    "dd": select_degree_discount,
    "sigma": select_sigma,
    "pi": select_pi,
}


def select(label: str, g: Graph, k: int, cfg: DiffusionConfig | None = None, **params) -> SeedSet:
    """Dispatch by CLI label. ``grd`` needs a diffusion config."""
    if label not in SELECTORS:
        raise SelectionError(f"unknown heuristic {label!r}; choose from {sorted(SELECTORS)}")
    if label == "grd":
        if cfg is None:
            raise SelectionError("greedy selection needs a diffusion config")
        return select_greedy(g, k, cfg)
    return SELECTORS[label](g, k, **params)
