"""Independent-cascade and linear-threshold simulation with Monte Carlo spread estimates.

Randomness comes from a SplitMix64 stream. Every cascade round gets its own
stream whose starting state is a hash of ``(master_seed, seed-set key,
round index)``, so an estimate depends only on its inputs and not on which
other estimates were computed before it, or in what order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numba
import numpy as np

from .graph import Graph, GraphError

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
EXACT_EDGE_BUDGET = 20

# --------------------------------------------------------------------------- seed hashing


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, *labels: int | str) -> int:
    """Deterministic 64-bit child seed for a labelled sub-stream of ``master``."""
    h = mix64(int(master) + GOLDEN)
    for label in labels:
        if isinstance(label, str):
            for byte in label.encode():
                h = mix64(h ^ byte) + GOLDEN
        else:
            h = mix64(h ^ (int(label) & MASK64)) + GOLDEN
    return mix64(h)


def seed_set_key(seeds: Iterable[int]) -> int:
    """Order-independent hash of a node set."""
    h = 0x2545F4914F6CDD1D
    for v in sorted(set(int(s) for s in seeds)):
        h = mix64(h ^ (v + 1)) + GOLDEN
    return mix64(h)


# --------------------------------------------------------------------------- kernels

_U = np.uint64
_GOLDEN = _U(GOLDEN)
_M1 = _U(0xBF58476D1CE4E5B9)
_M2 = _U(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = _U(30), _U(27), _U(31), _U(11)
_INV53 = 1.0 / 9007199254740992.0

IC, LT = 0, 1


@numba.njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@numba.njit(cache=True, inline="always")
def _next(state):
    state = state + _GOLDEN
    return state, float(_mix(state) >> _S11) * _INV53


@numba.njit(cache=True)
def _round_state(master, key, r):
    # the extra finalizer keeps neighbouring rounds from sharing a shifted stream
    return _mix(_mix(_mix(master + _GOLDEN) ^ key) + _U(r + 1) * _GOLDEN)


@numba.njit(cache=True)
def _ic_run(indptr, indices, weights, seeds, state, max_steps, active, order):
    c = 0
    for s in seeds:
        if not active[s]:
            active[s] = True
            order[c] = s
            c += 1
    lo, hi, step = 0, c, 0
    while lo < hi and (max_steps < 0 or step < max_steps):
        for idx in range(lo, hi):
            u = order[idx]
            for e in range(indptr[u], indptr[u + 1]):
                v = indices[e]
                if not active[v]:
                    state, x = _next(state)
                    if x < weights[e]:
                        active[v] = True
                        order[c] = v
                        c += 1
        lo, hi = hi, c
        step += 1
    return c, step


@numba.njit(cache=True)
def _lt_run(indptr, indices, seeds, state, th_lo, th_hi, max_steps, active, order, count, theta):
    n = len(indptr) - 1
    span = th_hi - th_lo
    for v in range(n):
        state, x = _next(state)
        theta[v] = th_lo + span * x
    c = 0
    for s in seeds:
        if not active[s]:
            active[s] = True
            order[c] = s
            c += 1
    lo, hi, step = 0, c, 0
    while lo < hi and (max_steps < 0 or step < max_steps):
        for idx in range(lo, hi):
            u = order[idx]
            for e in range(indptr[u], indptr[u + 1]):
                v = indices[e]
                if not active[v]:
                    count[v] += 1
                    if count[v] / (indptr[v + 1] - indptr[v]) > theta[v]:
                        active[v] = True
                        order[c] = v
                        c += 1
        lo, hi = hi, c
        step += 1
    for e in range(n):
        count[e] = 0
    return c, step


@numba.njit(cache=True)
def _cascade_sizes(indptr, indices, weights, seeds_flat, seeds_ptr, keys, master, rounds,
                   model, th_lo, th_hi, max_steps):
    n = len(indptr) - 1
    nsets = len(seeds_ptr) - 1
    out = np.empty((nsets, rounds), dtype=np.int64)
    active = np.zeros(n, dtype=np.bool_)
    order = np.empty(n, dtype=np.int64)
    count = np.zeros(n, dtype=np.int64)
    theta = np.empty(n, dtype=np.float64)
    for j in range(nsets):
        seeds = seeds_flat[seeds_ptr[j]:seeds_ptr[j + 1]]
        for r in range(rounds):
            state = _round_state(master, keys[j], r)
            if model == 0:
                c, _ = _ic_run(indptr, indices, weights, seeds, state, max_steps, active, order)
            else:
                c, _ = _lt_run(indptr, indices, seeds, state, th_lo, th_hi, max_steps,
                               active, order, count, theta)
            for idx in range(c):
                active[order[idx]] = False
            out[j, r] = c
    return out


@numba.njit(cache=True)
def _single(indptr, indices, weights, seeds, state, model, th_lo, th_hi, max_steps):
    n = len(indptr) - 1
    active = np.zeros(n, dtype=np.bool_)
    order = np.empty(n, dtype=np.int64)
    if model == 0:
        c, steps = _ic_run(indptr, indices, weights, seeds, state, max_steps, active, order)
    else:
        count = np.zeros(n, dtype=np.int64)
        theta = np.empty(n, dtype=np.float64)
        c, steps = _lt_run(indptr, indices, seeds, state, th_lo, th_hi, max_steps,
                           active, order, count, theta)
    return order[:c].copy(), steps


# --------------------------------------------------------------------------- public API


@dataclass(frozen=True)
class DiffusionConfig:
    """Which cascade model to run and how many rounds to average.

    ``max_steps`` of ``None`` runs every cascade to quiescence. The LT
    thresholds are redrawn uniformly on ``[threshold_lo, threshold_hi]`` at
    the start of every round.
    """

    model: str = "ic"
    rounds: int = 100
    max_steps: int | None = None
    master_seed: int = 0
    threshold_lo: float = 0.01
    threshold_hi: float = 0.20

    def __post_init__(self):
        if self.model not in ("ic", "lt"):
            raise ValueError(f"unknown diffusion model {self.model!r}")
        if self.rounds < 1:
            raise ValueError("rounds must be positive")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be positive or None")
        if not 0.0 <= self.threshold_lo <= self.threshold_hi <= 1.0:
            raise ValueError("threshold range must satisfy 0 <= lo <= hi <= 1")

    def with_seed(self, master_seed: int) -> "DiffusionConfig":
        return replace(self, master_seed=int(master_seed) & MASK64)

    def with_rounds(self, rounds: int) -> "DiffusionConfig":
        return replace(self, rounds=int(rounds))


@dataclass(frozen=True)
class SpreadEstimate:
    mean: float
    std: float
    rounds: int
    sizes: np.ndarray | None = None

    def stderr(self) -> float:
        return self.std / math.sqrt(self.rounds)


def _check_seeds(g: Graph, seeds: Sequence[int]) -> np.ndarray:
    arr = np.asarray(sorted(set(int(s) for s in seeds)), dtype=np.int64)
    if len(arr) == 0:
        raise ValueError("seed set is empty")
    if arr[0] < 0 or arr[-1] >= g.n:
        raise GraphError("seed id out of range")
    return arr


def _summarize(sizes: np.ndarray) -> tuple[float, float]:
    # integer sizes, so the sums are exact regardless of round order
    r = len(sizes)
    total = int(sizes.sum())
    mean = total / r
    if r < 2:
        return float(mean), 0.0
    sq = int((sizes * sizes).sum())
    var = (sq - total * total / r) / (r - 1)
    return float(mean), math.sqrt(max(var, 0.0))


def cascade_sizes(g: Graph, seed_sets: Sequence[Sequence[int]], cfg: DiffusionConfig) -> np.ndarray:
    """Raw cascade sizes, shape ``(len(seed_sets), cfg.rounds)``."""
    arrays = [_check_seeds(g, s) for s in seed_sets]
    ptr = np.zeros(len(arrays) + 1, dtype=np.int64)
    np.cumsum([len(a) for a in arrays], out=ptr[1:])
    flat = np.concatenate(arrays) if arrays else np.empty(0, dtype=np.int64)
    keys = np.array([seed_set_key(a.tolist()) for a in arrays], dtype=np.uint64)
    model = IC if cfg.model == "ic" else LT
    steps = -1 if cfg.max_steps is None else cfg.max_steps
    return _cascade_sizes(g.indptr, g.indices, g.weights, flat, ptr, keys, np.uint64(cfg.master_seed),
                          cfg.rounds, model, cfg.threshold_lo, cfg.threshold_hi, steps)


def estimate_many(g: Graph, seed_sets: Sequence[Sequence[int]], cfg: DiffusionConfig,
                  keep_sizes: bool = False) -> list[SpreadEstimate]:
    sizes = cascade_sizes(g, seed_sets, cfg)
    out = []
    for row in sizes:
        mean, std = _summarize(row)
        out.append(SpreadEstimate(mean, std, cfg.rounds, row.copy() if keep_sizes else None))
    return out


def estimate_spread(g: Graph, seeds: Sequence[int], cfg: DiffusionConfig, keep_sizes: bool = False) -> SpreadEstimate:
    """Mean and sample std of ``cfg.rounds`` cascade sizes from ``seeds``."""
    return estimate_many(g, [seeds], cfg, keep_sizes)[0]


def _single_cascade(g: Graph, seeds: Sequence[int], rng_seed: int, model: int, lo: float, hi: float,
                    max_steps: int | None) -> set[int]:
    arr = _check_seeds(g, seeds)
    state = np.uint64(mix64(int(rng_seed)))
    order, _ = _single(g.indptr, g.indices, g.weights, arr, state, model, lo, hi,
                       -1 if max_steps is None else max_steps)
    return set(order.tolist())


def simulate_ic(g: Graph, seeds: Sequence[int], rng_seed: int = 0, max_steps: int | None = None) -> set[int]:
    """One IC cascade; returns the activated node set."""
    return _single_cascade(g, seeds, rng_seed, IC, 0.0, 0.0, max_steps)


def simulate_lt(g: Graph, seeds: Sequence[int], rng_seed: int = 0, threshold_lo: float = 0.01,
                threshold_hi: float = 0.20, max_steps: int | None = None) -> set[int]:
    """One LT cascade; edge weights are ignored, nodes fire when the active
    fraction of their neighbors strictly exceeds their threshold."""
    if not 0.0 <= threshold_lo <= threshold_hi <= 1.0:
        raise ValueError("threshold range must satisfy 0 <= lo <= hi <= 1")
    return _single_cascade(g, seeds, rng_seed, LT, threshold_lo, threshold_hi, max_steps)


def lt_trajectory(g: Graph, seeds: Sequence[int], rng_seed: int = 0, threshold_lo: float = 0.01,
                  threshold_hi: float = 0.20) -> list[int]:
    """Cumulative LT cascade size after each step (index 0 is the seed count)."""
    sizes = [len(_check_seeds(g, seeds))]
    t = 1
    while True:
        c = len(_single_cascade(g, seeds, rng_seed, LT, threshold_lo, threshold_hi, t))
        if c == sizes[-1]:
            return sizes
        sizes.append(c)
        t += 1


# --------------------------------------------------------------------------- exact oracles


@numba.njit(cache=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@numba.njit(cache=True)
def _world_labels(n, eu, ev):
    """Connected-component root of every node, for each of the 2^m live-edge worlds."""
    m = len(eu)
    worlds = 1 << m
    out = np.empty((worlds, n), dtype=np.int64)
    parent = np.empty(n, dtype=np.int64)
    for w in range(worlds):
        for i in range(n):
            parent[i] = i
        for e in range(m):
            if (w >> e) & 1:
                a = _find(parent, eu[e])
                b = _find(parent, ev[e])
                if a != b:
                    parent[a] = b
        for i in range(n):
            out[w, i] = _find(parent, i)
    return out


def _world_probs(p: np.ndarray) -> np.ndarray:
    """Probability of each live-edge world, bit ``e`` set meaning edge ``e`` is live."""
    probs = np.ones(1)
    for pe in p:
        probs = np.concatenate([probs * (1.0 - pe), probs * pe])
    return probs


def exact_ic_spread(g: Graph, seeds: Sequence[int]) -> float:
    """Expected IC spread by enumerating every live-edge world.

    On an undirected graph each edge is attempted at most once per cascade,
    so one coin per edge reproduces the cascade distribution exactly.
    """
    arr = _check_seeds(g, seeds)
    pairs, w = g.edges()
    if len(w) > EXACT_EDGE_BUDGET:
        raise ValueError(f"exact spread enumerates 2^|E| worlds; |E|={len(w)} exceeds {EXACT_EDGE_BUDGET}")
    labels = _world_labels(g.n, pairs[:, 0].copy(), pairs[:, 1].copy())
    probs = _world_probs(w)
    seed_roots = labels[:, arr]
    reached = (labels[:, :, None] == seed_roots[:, None, :]).any(axis=2).sum(axis=1)
    return float(probs @ reached)


def _bridges(g: Graph) -> set[tuple[int, int]]:
    import networkx as nx

    h = nx.Graph()
    h.add_nodes_from(range(g.n))
    h.add_edges_from(map(tuple, g.edges()[0].tolist()))
    return {(min(u, v), max(u, v)) for u, v in nx.bridges(h)}


class BridgedExactIC:
    """Exact expected IC spread for graphs whose 2-edge-connected blocks are small.

    Bridges are conditioned on one at a time by message passing over the
    bridge tree, and each block's live-edge worlds are enumerated once, so
    the cost is exponential in the largest block's edge count rather than
    in ``|E|``.
    """

    def __init__(self, g: Graph, block_edge_budget: int = EXACT_EDGE_BUDGET):
        self.g = g
        pairs, w = g.edges()
        bridges = _bridges(g)
        internal = [i for i, (u, v) in enumerate(pairs.tolist()) if (u, v) not in bridges]
        # blocks = components after deleting bridges
        parent = list(range(g.n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i in internal:
            a, b = find(int(pairs[i, 0])), find(int(pairs[i, 1]))
            if a != b:
                parent[a] = b
        roots = sorted({find(v) for v in range(g.n)})
        block_of = np.empty(g.n, dtype=np.int64)
        root_index = {r: k for k, r in enumerate(roots)}
        for v in range(g.n):
            block_of[v] = root_index[find(v)]
        self.block_of = block_of
        self.block_nodes = [np.flatnonzero(block_of == b) for b in range(len(roots))]
        self.labels, self.probs = [], []
        for b, nodes in enumerate(self.block_nodes):
            local = {int(v): k for k, v in enumerate(nodes)}
            edges = [i for i in internal if block_of[pairs[i, 0]] == b]
            if len(edges) > block_edge_budget:
                raise ValueError(f"block with {len(edges)} edges exceeds budget {block_edge_budget}")
            eu = np.array([local[int(pairs[i, 0])] for i in edges], dtype=np.int64)
            ev = np.array([local[int(pairs[i, 1])] for i in edges], dtype=np.int64)
            self.labels.append(_world_labels(len(nodes), eu, ev))
            self.probs.append(_world_probs(w[edges]))
        self.tree: dict[int, list[tuple[int, int, int, float]]] = {b: [] for b in range(len(roots))}
        for (u, v), wt in zip(pairs.tolist(), w.tolist()):
            if (u, v) in bridges:
                bu, bv = int(block_of[u]), int(block_of[v])
                self.tree[bu].append((bv, u, v, wt))
                self.tree[bv].append((bu, v, u, wt))

    def _reach(self, block: int, exit_node: int, came_from: int, seeds: set[int]) -> float:
        """P(exit_node is reached from seeds inside the subtree hanging off ``block``)."""
        nodes = self.block_nodes[block]
        local = {int(v): k for k, v in enumerate(nodes)}
        sources: list[tuple[int, float]] = [(local[s], 1.0) for s in seeds if self.block_of[s] == block]
        for nb, here, there, wt in self.tree[block]:
            if nb == came_from:
                continue
            q = wt * self._reach(nb, there, block, seeds)
            if q > 0.0:
                sources.append((local[here], q))
        if not sources:
            return 0.0
        lab = self.labels[block]
        target = lab[:, local[exit_node]]
        miss = np.ones(len(target))
        for k, q in sources:
            miss *= np.where(lab[:, k] == target, 1.0 - q, 1.0)
        return float(self.probs[block] @ (1.0 - miss))

    def node_probabilities(self, seeds: Sequence[int]) -> np.ndarray:
        s = set(_check_seeds(self.g, seeds).tolist())
        return np.array([self._reach(int(self.block_of[v]), v, -1, s) for v in range(self.g.n)])

    def spread(self, seeds: Sequence[int]) -> float:
        return float(self.node_probabilities(seeds).sum())
