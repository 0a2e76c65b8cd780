"""Sobol indices over binary seed-inclusion variables.

A :class:`SubsetSpreadTable` holds the averaged spread ``Y`` for every one of
the ``2**m`` inclusion patterns over ``m`` candidate seeds; bit ``i`` of a
mask means candidate ``i`` is seeded. Inputs are treated as independent fair
coins, so every moment is an equal-weight average over the table.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .diffusion import (BridgedExactIC, DiffusionConfig, EXACT_EDGE_BUDGET, estimate_many,
                        exact_ic_spread)
from .graph import Graph

logger = logging.getLogger(__name__)

MAX_CANDIDATES = 32
WARN_CANDIDATES = 20


class DegenerateVarianceError(ArithmeticError):
    """Var(Y) is zero, so normalized indices are undefined."""


# --------------------------------------------------------------------------- tables


@dataclass
class SubsetSpreadTable:
    candidates: tuple[int, ...]
    mean: np.ndarray
    std: np.ndarray
    rounds: np.ndarray
    config: DiffusionConfig | None = None
    simulated_rounds: int = 0

    def __post_init__(self):
        self.candidates = tuple(int(c) for c in self.candidates)
        m = len(self.candidates)
        if not 1 <= m <= MAX_CANDIDATES:
            raise ValueError(f"candidate count {m} outside [1, {MAX_CANDIDATES}]")
        if len(set(self.candidates)) != m:
            raise ValueError("candidates must be distinct")
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        self.rounds = np.asarray(self.rounds, dtype=np.int64)
        if not (len(self.mean) == len(self.std) == len(self.rounds) == 1 << m):
            raise ValueError("table must have exactly 2**m cells")

    @property
    def m(self) -> int:
        return len(self.candidates)

    @classmethod
    def from_values(cls, values: Sequence[float], candidates: Sequence[int] | None = None) -> "SubsetSpreadTable":
        """Exact (noise-free) table; ``values[mask]`` is ``Y`` for that pattern."""
        values = np.asarray(values, dtype=np.float64)
        m = int(round(math.log2(len(values)))) if len(values) else 0
        if len(values) != 1 << m:
            raise ValueError("number of values must be a power of two")
        cands = tuple(range(m)) if candidates is None else tuple(candidates)
        return cls(cands, values, np.zeros(len(values)), np.zeros(len(values), dtype=np.int64))

    def members(self, mask: int) -> tuple[int, ...]:
        return tuple(c for i, c in enumerate(self.candidates) if mask >> i & 1)

    def mask_of(self, nodes: Iterable[int]) -> int:
        pos = {c: i for i, c in enumerate(self.candidates)}
        return sum(1 << pos[int(v)] for v in nodes)

    def restrict(self, keep: Sequence[int]) -> "SubsetSpreadTable":
        """Sub-table over the candidates ``keep`` (node ids, in the order given)."""
        pos = [self.candidates.index(int(v)) for v in keep]
        idx = np.zeros(1 << len(pos), dtype=np.int64)
        for j, p in enumerate(pos):
            idx[np.arange(len(idx)) >> j & 1 == 1] |= 1 << p
        return SubsetSpreadTable(tuple(keep), self.mean[idx], self.std[idx], self.rounds[idx], self.config, 0)

    def to_csv(self, out: io.TextIOBase | None = None) -> str:
        """CSV with columns mask, mean, std, rounds. Character ``i`` of the mask
        string is candidate ``i``; a header comment lists the candidates."""
        buf = io.StringIO()
        buf.write("# candidates: " + " ".join(map(str, self.candidates)) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mask", "mean", "std", "rounds"])
        for mask in range(1 << self.m):
            bits = "".join("1" if mask >> i & 1 else "0" for i in range(self.m))
            w.writerow([bits, repr(float(self.mean[mask])), repr(float(self.std[mask])), int(self.rounds[mask])])
        text = buf.getvalue()
        if out is not None:
            out.write(text)
        return text

    @classmethod
    def from_csv(cls, source: io.TextIOBase | str) -> "SubsetSpreadTable":
        if isinstance(source, str):
            source = io.StringIO(source)
        candidates = None
        rows = []
        for line in source:
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("candidates:"):
                    candidates = [int(t) for t in body.split(":", 1)[1].split()]
                continue
            if line.strip():
                rows.append(line)
        reader = csv.DictReader(rows)
        cells = {}
        widths = set()
        for row in reader:
            bits = row["mask"].strip()
            widths.add(len(bits))
            mask = sum(1 << i for i, ch in enumerate(bits) if ch == "1")
            if mask in cells:
                raise ValueError(f"duplicate mask {bits}")
            cells[mask] = (float(row["mean"]), float(row.get("std") or 0.0), int(row.get("rounds") or 0))
        if not cells:
            raise ValueError("empty table")
        if len(widths) != 1:
            raise ValueError("mask strings differ in width")
        m = widths.pop()
        if len(cells) != 1 << m:
            raise ValueError(f"table has {len(cells)} cells, expected {1 << m}")
        mean = np.array([cells[k][0] for k in range(1 << m)])
        std = np.array([cells[k][1] for k in range(1 << m)])
        rounds = np.array([cells[k][2] for k in range(1 << m)])
        return cls(tuple(candidates) if candidates else tuple(range(m)), mean, std, rounds)


SpreadCache = dict  # frozenset(nodes) -> (mean, std, rounds)


def build_subset_table(g: Graph, candidates: Sequence[int], cfg: DiffusionConfig,
                       cache: SpreadCache | None = None) -> SubsetSpreadTable:
    """Estimate ``Y`` for every non-empty inclusion pattern over ``candidates``.

    The empty pattern is 0 by definition and costs no rounds. Per-pattern
    random streams are keyed by node-set content, so a ``cache`` shared
    across calls returns exactly what a fresh estimate would.
    """
    candidates = tuple(int(c) for c in candidates)
    m = len(candidates)
    if not 1 <= m <= MAX_CANDIDATES:
        raise ValueError(f"candidate count {m} outside [1, {MAX_CANDIDATES}]")
    if len(set(candidates)) != m:
        raise ValueError("candidates must be distinct")
    if m > WARN_CANDIDATES:
        warnings.warn(f"building a table of 2**{m} cells", RuntimeWarning, stacklevel=2)
    size = 1 << m
    mean = np.zeros(size)
    std = np.zeros(size)
    rounds = np.zeros(size, dtype=np.int64)
    todo_masks, todo_sets = [], []
    for mask in range(1, size):
        nodes = frozenset(c for i, c in enumerate(candidates) if mask >> i & 1)
        if cache is not None and nodes in cache:
            mean[mask], std[mask], rounds[mask] = cache[nodes]
        else:
            todo_masks.append(mask)
            todo_sets.append(sorted(nodes))
    simulated = 0
    chunk = 4096
    for start in range(0, len(todo_sets), chunk):
        ests = estimate_many(g, todo_sets[start:start + chunk], cfg)
        for mask, nodes, est in zip(todo_masks[start:start + chunk], todo_sets[start:start + chunk], ests):
            mean[mask], std[mask], rounds[mask] = est.mean, est.std, est.rounds
            simulated += est.rounds
            if cache is not None:
                cache[frozenset(nodes)] = (est.mean, est.std, est.rounds)
    return SubsetSpreadTable(candidates, mean, std, rounds, cfg, simulated)


def table_from_function(candidates: Sequence[int], fn: Callable[[frozenset], float]) -> SubsetSpreadTable:
    """Exact table of a set function; ``fn`` is not called for the empty set."""
    candidates = tuple(candidates)
    values = [0.0] + [fn(frozenset(c for i, c in enumerate(candidates) if mask >> i & 1))
                      for mask in range(1, 1 << len(candidates))]
    return SubsetSpreadTable.from_values(values, candidates)


def build_exact_table(g: Graph, candidates: Sequence[int]) -> SubsetSpreadTable:
    """Exact IC table, by brute-force enumeration when ``|E|`` allows, else per bridge-tree block."""
    if g.num_edges <= EXACT_EDGE_BUDGET:
        return table_from_function(candidates, lambda s: exact_ic_spread(g, sorted(s)))
    oracle = BridgedExactIC(g)
    return table_from_function(candidates, lambda s: oracle.spread(sorted(s)))


# --------------------------------------------------------------------------- indices


def _values(table: SubsetSpreadTable | np.ndarray) -> np.ndarray:
    return table.mean if isinstance(table, SubsetSpreadTable) else np.asarray(table, dtype=np.float64)


def _cube(y: np.ndarray) -> tuple[np.ndarray, int]:
    m = len(y).bit_length() - 1
    # C-order reshape puts bit i of the mask on axis m-1-i
    return y.reshape((2,) * m), m


def _axis(m: int, i: int) -> int:
    if not 0 <= i < m:
        raise IndexError(f"variable {i} out of range for m={m}")
    return m - 1 - i


def moments(table) -> tuple[float, float]:
    """Equal-weight mean and population variance of the cell values."""
    y = _values(table)
    mu = float(np.mean(y))
    return mu, float(np.mean((y - mu) ** 2))


def _checked_var(y: np.ndarray) -> tuple[float, float]:
    mu = float(np.mean(y))
    var = float(np.mean((y - mu) ** 2))
    scale = max(1.0, float(np.max(np.abs(y))) ** 2)
    if var <= 1e-26 * scale:
        raise DegenerateVarianceError("Var(Y) is zero; Sobol indices are undefined")
    return mu, var


def _deltas(y: np.ndarray, i: int) -> tuple[np.ndarray, int]:
    cube, m = _cube(y)
    ax = _axis(m, i)
    return np.take(cube, 1, axis=ax) - np.take(cube, 0, axis=ax), m


def first_order_index(table, i: int, absolute: bool = False) -> float:
    """``S_i = (sum of Y(i in) - Y(i out))^2 / (4^m Var Y)``.

    The differences are signed unless ``absolute`` is set; the two agree when
    ``Y`` is monotone in every seed.
    """
    y = _values(table)
    _, var = _checked_var(y)
    d, m = _deltas(y, i)
    if absolute:
        d = np.abs(d)
    return float(d.sum()) ** 2 / (4.0 ** m * var)


def total_index(table, i: int) -> float:
    """``S^T_i = sum of (Y(i in) - Y(i out))^2 / (2^(m+1) Var Y)``."""
    y = _values(table)
    _, var = _checked_var(y)
    d, m = _deltas(y, i)
    return float(np.sum(d * d)) / (2.0 ** (m + 1) * var)


def _mask_vars(mask: int, m: int) -> list[int]:
    if mask <= 0 or mask >= 1 << m:
        raise ValueError(f"subset mask {mask} invalid for m={m}")
    return [i for i in range(m) if mask >> i & 1]


def subset_first_order(table, mask: int) -> float:
    """Closed first-order index of the variable group in ``mask``.

    Each conditional mean is ``2^(s-m)`` times the sum of ``Y`` over the
    patterns of the remaining variables.
    """
    y = _values(table)
    mu, var = _checked_var(y)
    cube, m = _cube(y)
    members = _mask_vars(mask, m)
    s = len(members)
    others = tuple(_axis(m, i) for i in range(m) if i not in members)
    sums = cube.sum(axis=others) if others else cube
    return float(np.sum((sums * 2.0 ** (s - m) - mu) ** 2)) / (2.0 ** s * var)


def higher_order_index(table, mask: int, memo: dict[int, float] | None = None) -> float:
    """Pure interaction index of the group in ``mask`` (size at least 2).

    Peels off every singleton and every smaller interaction from the group's
    closed index. Not clamped: noisy tables can give negative values.
    """
    y = _values(table)
    m = len(y).bit_length() - 1
    members = _mask_vars(mask, m)
    if len(members) < 2:
        raise ValueError("higher-order index needs at least two variables")
    if memo is None:
        memo = {}
    if mask in memo:
        return memo[mask]
    value = subset_first_order(y, mask)
    for i in members:
        key = 1 << i
        if key not in memo:
            memo[key] = first_order_index(y, i)
        value -= memo[key]
    # proper sub-masks of size >= 2
    sub = (mask - 1) & mask
    while sub:
        if sub & (sub - 1):
            value -= higher_order_index(y, sub, memo)
        sub = (sub - 1) & mask
    memo[mask] = value
    return value


@dataclass
class SobolDecomposition:
    candidates: tuple[int, ...]
    mean_y: float
    var_y: float
    first_order: dict[int, float]
    total: dict[int, float]
    higher_order: dict[tuple[int, ...], float]
    max_order: int
    residual: float | None = None
    cell_std_max: float = 0.0

    def variance_contributions(self) -> dict[str, dict]:
        v = self.var_y
        return {
            "first_order": {c: s * v for c, s in self.first_order.items()},
            "total": {c: s * v for c, s in self.total.items()},
            "higher_order": {k: s * v for k, s in self.higher_order.items()},
        }

    def to_dict(self) -> dict:
        contrib = self.variance_contributions()

        def pairs(d):
            return [{"nodes": list(k), "index": d[k], "variance": contrib["higher_order"][k]} for k in d]

        return {
            "candidates": list(self.candidates),
            "mean_y": self.mean_y,
            "var_y": self.var_y,
            "max_order": self.max_order,
            "first_order": [{"node": c, "index": s, "variance": contrib["first_order"][c]}
                            for c, s in self.first_order.items()],
            "total": [{"node": c, "index": s, "variance": contrib["total"][c]} for c, s in self.total.items()],
            "higher_order": pairs(self.higher_order),
            "closure_residual": self.residual,
            "max_cell_std": self.cell_std_max,
        }


def full_decomposition(table: SubsetSpreadTable, max_order: int = 2) -> SobolDecomposition:
    m = table.m
    if not 1 <= max_order <= m:
        raise ValueError(f"max_order must be in [1, {m}]")
    y = table.mean
    mu, var = _checked_var(y)
    memo: dict[int, float] = {}
    first = {}
    for i, c in enumerate(table.candidates):
        memo[1 << i] = first[c] = first_order_index(y, i)
    total = {c: total_index(y, i) for i, c in enumerate(table.candidates)}
    higher = {}
    for order in range(2, max_order + 1):
        for combo in itertools.combinations(range(m), order):
            mask = sum(1 << i for i in combo)
            higher[tuple(table.candidates[i] for i in combo)] = higher_order_index(y, mask, memo)
    residual = None
    if max_order == m:
        residual = 1.0 - sum(first.values()) - sum(higher.values())
    return SobolDecomposition(table.candidates, mu, var, first, total, higher, max_order, residual,
                              float(np.max(table.std)) if len(table.std) else 0.0)
