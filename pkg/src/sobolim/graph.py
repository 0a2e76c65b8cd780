"""Undirected weighted graphs in CSR form, edge-list I/O and synthetic generators."""

from __future__ import annotations

import io
import logging
from collections import deque
from dataclasses import dataclass
from typing import Iterable, TextIO

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

logger = logging.getLogger(__name__)

UNREACHABLE = -1


class GraphError(ValueError):
    """Raised for malformed graph input or invalid generator parameters."""


class Graph:
    """Immutable undirected graph with one activation probability per edge.

    Both directions of every edge are stored. ``indptr``/``indices``/``weights``
    follow the usual CSR layout and neighbor lists are sorted ascending.
    """

    __slots__ = ("n", "indptr", "indices", "weights", "_edges")

    def __init__(self, n: int, indptr: np.ndarray, indices: np.ndarray, weights: np.ndarray):
        self.n = int(n)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.weights = np.ascontiguousarray(weights, dtype=np.float64)
        for arr in (self.indptr, self.indices, self.weights):
            arr.setflags(write=False)
        self._edges = None

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], weights: Iterable[float] | None = None) -> "Graph":
        """Build from undirected ``(u, v)`` pairs; ``weights`` defaults to 1.0."""
        e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64).reshape(-1, 2)
        if weights is None:
            w = np.ones(len(e), dtype=np.float64)
        else:
            w = np.asarray(list(weights) if not isinstance(weights, np.ndarray) else weights, dtype=np.float64)
        if len(w) != len(e):
            raise GraphError("edges and weights differ in length")
        if n < 0:
            raise GraphError("negative node count")
        if len(e):
            if e.min() < 0 or e.max() >= n:
                raise GraphError("node id out of range")
            if np.any(e[:, 0] == e[:, 1]):
                raise GraphError("self-loop")
            if np.any((w < 0) | (w > 1)) or not np.all(np.isfinite(w)):
                raise GraphError("weight outside [0, 1]")
            lo = np.minimum(e[:, 0], e[:, 1])
            hi = np.maximum(e[:, 0], e[:, 1])
            key = lo * n + hi
            if len(np.unique(key)) != len(key):
                raise GraphError("duplicate edge")
        else:
            lo = hi = np.empty(0, dtype=np.int64)
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        ww = np.concatenate([w, w])
        order = np.lexsort((dst, src))
        src, dst, ww = src[order], dst[order], ww[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return cls(n, indptr, dst, ww)

    @property
    def num_edges(self) -> int:
        return len(self.indices) // 2

    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def weight(self, u: int, v: int) -> float:
        nbrs = self.neighbors(u)
        pos = np.searchsorted(nbrs, v)
        if pos >= len(nbrs) or nbrs[pos] != v:
            raise KeyError((u, v))
        return float(self.weights[self.indptr[u] + pos])

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(pairs, weights)`` for each undirected edge with ``u < v``, sorted."""
        if self._edges is None:
            src = np.repeat(np.arange(self.n, dtype=np.int64), self.degree())
            keep = src < self.indices
            self._edges = (np.column_stack([src[keep], self.indices[keep]]), self.weights[keep])
        return self._edges

    def adjacency(self, weighted: bool = True) -> csr_matrix:
        data = self.weights if weighted else np.ones_like(self.weights)
        return csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def with_weights(self, edge_weights: np.ndarray) -> "Graph":
        """Copy of this graph with new per-edge weights, ordered as in :meth:`edges`."""
        pairs, _ = self.edges()
        return Graph.from_edges(self.n, pairs, edge_weights)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.weights, other.weights)
        )

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.num_edges})"


@dataclass(frozen=True)
class GraphGenSpec:
    """Parameters for a synthetic graph.

    ``avg_degree`` is used by ER, ``ring_degree``/``rewire`` by WS.
    """

    kind: str = "er"
    n: int = 5000
    avg_degree: float = 10.0
    ring_degree: int = 10
    rewire: float = 0.1
    weight_lo: float = 0.4
    weight_hi: float = 0.8
    seed: int = 0
    max_attempts: int = 100

    def __post_init__(self):
        if self.kind not in ("er", "ws"):
            raise GraphError(f"unknown graph kind {self.kind!r}")
        if self.n < 2:
            raise GraphError("n must be at least 2")
        if not 0.0 <= self.weight_lo <= self.weight_hi <= 1.0:
            raise GraphError("weight range must satisfy 0 <= lo <= hi <= 1")


# --------------------------------------------------------------------------- I/O


def load_edge_list(source: TextIO | str, default_weight: float = 1.0) -> tuple[Graph, list]:
    """Parse a whitespace-separated ``u v [w]`` edge list.

    Returns the graph and the list of external ids, so ``ids[i]`` is the
    original label of internal node ``i``. Integer labels are ordered
    numerically, anything else lexicographically. A ``# nodes: N`` comment
    declares integer nodes ``0..N-1`` that may be isolated.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    if not 0.0 <= default_weight <= 1.0:
        raise GraphError("default weight outside [0, 1]")
    raw: list[tuple[str, str, float]] = []
    declared = 0
    for lineno, line in enumerate(source, start=1):
        text = line.strip()
        if text.startswith("#"):
            body = text[1:].strip()
            if body.startswith("nodes:"):
                try:
                    declared = int(body.split(":", 1)[1])
                except ValueError:
                    raise GraphError(f"line {lineno}: bad node-count directive") from None
            continue
        if not text:
            continue
        parts = text.split()
        if len(parts) not in (2, 3):
            raise GraphError(f"line {lineno}: expected 'u v [w]', got {text!r}")
        u, v = parts[0], parts[1]
        if u == v:
            raise GraphError(f"line {lineno}: self-loop on {u}")
        if len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise GraphError(f"line {lineno}: bad weight {parts[2]!r}") from None
            if not 0.0 <= w <= 1.0:
                raise GraphError(f"line {lineno}: weight {w} outside [0, 1]")
        else:
            w = default_weight
        raw.append((u, v, w))

    labels = {tok for u, v, _ in raw for tok in (u, v)}
    try:
        as_int = {tok: int(tok) for tok in labels}
    except ValueError:
        as_int = None
    if as_int is not None:
        ids: list = sorted(set(as_int.values()) | set(range(declared)))
        lookup = {i: k for k, i in enumerate(ids)}
        dense = {tok: lookup[as_int[tok]] for tok in labels}
    else:
        if declared:
            raise GraphError("node-count directive requires integer node ids")
        ids = sorted(labels)
        dense = {tok: k for k, tok in enumerate(ids)}

    seen: dict[tuple[int, int], int] = {}
    pairs, weights = [], []
    for lineno, (u, v, w) in enumerate(raw, start=1):
        a, b = dense[u], dense[v]
        key = (min(a, b), max(a, b))
        if key in seen:
            raise GraphError(f"duplicate edge {u} {v}")
        seen[key] = lineno
        pairs.append(key)
        weights.append(w)
    return Graph.from_edges(len(ids), np.asarray(pairs, dtype=np.int64).reshape(-1, 2), weights), ids


def dump_edge_list(g: Graph, out: TextIO) -> None:
    """Write ``g`` as ``u v w`` lines sorted by ``(u, v)``, weights to 6 decimals."""
    out.write(f"# nodes: {g.n}\n")
    pairs, weights = g.edges()
    for (u, v), w in zip(pairs.tolist(), weights.tolist()):
        out.write(f"{u} {v} {w:.6f}\n")


def dumps_edge_list(g: Graph) -> str:
    buf = io.StringIO()
    dump_edge_list(g, buf)
    return buf.getvalue()


# --------------------------------------------------------------------------- generators


def _uniform_weights(m: int, lo: float, hi: float, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(lo, hi, size=m) if hi > lo else np.full(m, lo)


def _from_nx(h: nx.Graph, n: int, spec: GraphGenSpec, rng: np.random.Generator) -> Graph:
    pairs = np.array(sorted((min(u, v), max(u, v)) for u, v in h.edges()), dtype=np.int64).reshape(-1, 2)
    return Graph.from_edges(n, pairs, _uniform_weights(len(pairs), spec.weight_lo, spec.weight_hi, rng))


def generate_er(spec: GraphGenSpec) -> Graph:
    """G(n, p) with ``p = avg_degree / (n - 1)`` and uniform edge weights."""
    if spec.kind != "er":
        raise GraphError("spec is not an ER spec")
    p = min(1.0, max(0.0, spec.avg_degree / (spec.n - 1)))
    seeds = np.random.SeedSequence(spec.seed).spawn(2)
    structure_seed = int(seeds[0].generate_state(1)[0])
    h = nx.fast_gnp_random_graph(spec.n, p, seed=structure_seed)
    return _from_nx(h, spec.n, spec, np.random.default_rng(seeds[1]))


def generate_ws(spec: GraphGenSpec) -> Graph:
    """Connected Watts-Strogatz graph.

    Each failed attempt is regenerated from scratch with the next derived
    sub-seed, up to ``spec.max_attempts`` attempts.
    """
    if spec.kind != "ws":
        raise GraphError("spec is not a WS spec")
    if spec.ring_degree % 2 or spec.ring_degree < 2 or spec.ring_degree >= spec.n:
        raise GraphError("ring degree must be even and in [2, n)")
    if not 0.0 <= spec.rewire <= 1.0:
        raise GraphError("rewire probability outside [0, 1]")
    seq = np.random.SeedSequence(spec.seed)
    weight_seq, attempt_seq = seq.spawn(2)
    for attempt, child in enumerate(attempt_seq.spawn(spec.max_attempts)):
        h = nx.watts_strogatz_graph(spec.n, spec.ring_degree, spec.rewire, seed=int(child.generate_state(1)[0]))
        if nx.is_connected(h):
            if attempt:
                logger.debug("WS graph connected after %d attempts", attempt + 1)
            return _from_nx(h, spec.n, spec, np.random.default_rng(weight_seq))
    raise GraphError(f"no connected WS graph within {spec.max_attempts} attempts")


def generate(spec: GraphGenSpec) -> Graph:
    return generate_er(spec) if spec.kind == "er" else generate_ws(spec)


def randomize_weights(g: Graph, lo: float, hi: float, seed: int) -> Graph:
    """Redraw every edge weight uniformly on ``[lo, hi]``."""
    if not 0.0 <= lo <= hi <= 1.0:
        raise GraphError("weight range must satisfy 0 <= lo <= hi <= 1")
    return g.with_weights(_uniform_weights(g.num_edges, lo, hi, np.random.default_rng(seed)))


# --------------------------------------------------------------------------- queries


def largest_connected_component(g: Graph) -> tuple[Graph, np.ndarray]:
    """Induced subgraph on the largest component and the original id of each new node.

    Ties between equal-size components go to the one holding the smallest id.
    """
    if g.n == 0:
        raise GraphError("empty graph")
    _, labels = connected_components(g.adjacency(), directed=False)
    sizes = np.bincount(labels)
    # labels are assigned in order of first node, so argmax already picks the smallest-id tie
    keep = np.flatnonzero(labels == int(np.argmax(sizes)))
    return induced_subgraph(g, keep), keep


def induced_subgraph(g: Graph, nodes: np.ndarray) -> Graph:
    nodes = np.asarray(nodes, dtype=np.int64)
    remap = np.full(g.n, -1, dtype=np.int64)
    remap[nodes] = np.arange(len(nodes))
    pairs, weights = g.edges()
    a, b = remap[pairs[:, 0]], remap[pairs[:, 1]]
    keep = (a >= 0) & (b >= 0)
    return Graph.from_edges(len(nodes), np.column_stack([a[keep], b[keep]]), weights[keep])


def bfs_distances(g: Graph, source: int) -> np.ndarray:
    """Hop counts from ``source`` to every node; ``UNREACHABLE`` where none exists."""
    dist = np.full(g.n, UNREACHABLE, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    indptr, indices = g.indptr, g.indices
    while queue:
        u = queue.popleft()
        for v in indices[indptr[u]:indptr[u + 1]]:
            if dist[v] == UNREACHABLE:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def bfs_distance(g: Graph, u: int, v: int) -> int | None:
    """Unweighted shortest-path length, or ``None`` if ``v`` is unreachable from ``u``."""
    for x in (u, v):
        if not 0 <= x < g.n:
            raise GraphError(f"node {x} out of range")
    d = int(bfs_distances(g, u)[v])
    return None if d == UNREACHABLE else d


def is_connected(g: Graph) -> bool:
    return g.n > 0 and bool(np.all(bfs_distances(g, 0) != UNREACHABLE))


# --------------------------------------------------------------------------- small fixtures


def path_graph(n: int, weight: float = 1.0) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)], [weight] * (n - 1))


def cycle_graph(n: int, weight: float = 1.0) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)], [weight] * n)


def star_graph(leaves: int, weight: float = 1.0) -> Graph:
    """Hub 0 joined to leaves ``1..leaves``."""
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)], [weight] * leaves)


def complete_graph(n: int, weight: float = 1.0) -> Graph:
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    return Graph.from_edges(n, pairs, [weight] * len(pairs))


def barbell_graph(clique: int, path_edges: int, weight: float = 1.0) -> Graph:
    """Two ``clique``-cliques joined by a path of ``path_edges`` edges.

    Nodes ``0..clique-1`` form the left clique and the last ``clique`` ids the
    right one; the path runs from node ``clique-1`` to node ``n-clique``.
    """
    inner = path_edges - 1
    n = 2 * clique + inner
    pairs = [(i, j) for i in range(clique) for j in range(i + 1, clique)]
    right = n - clique
    pairs += [(right + i, right + j) for i in range(clique) for j in range(i + 1, clique)]
    chain = [clique - 1, *range(clique, clique + inner), right]
    pairs += list(zip(chain[:-1], chain[1:]))
    return Graph.from_edges(n, pairs, [weight] * len(pairs))
