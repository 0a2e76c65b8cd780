"""SIM: over-select candidates with a base heuristic, then prune by Sobol total index."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

from .diffusion import DiffusionConfig
from .graph import Graph
from .heuristics import SeedSet, select
from .sobol import (MAX_CANDIDATES, DegenerateVarianceError, SpreadCache, build_subset_table,
                    total_index)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimConfig:
    k: int
    a: float = 2.0
    base: str = "deg"
    base_params: dict = field(default_factory=dict)
    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)
    reuse_cache: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("budget k must be at least 1")
        if not self.a > 1:
            raise ValueError("over-selection factor a must exceed 1")
        if self.n_candidates > MAX_CANDIDATES:
            raise ValueError(f"ceil(a*k)={self.n_candidates} exceeds the {MAX_CANDIDATES}-candidate cap")

    @property
    def n_candidates(self) -> int:
        # rounding guards against a*k landing a hair above an integer
        return math.ceil(round(self.a * self.k, 9))


@dataclass
class PruneStep:
    remaining: list[int]
    totals: dict[int, float]
    removed: int
    rounds: int
    fallback: bool = False
    marginals: dict[int, float] | None = None


@dataclass
class PruneTrace:
    candidates: list[int]
    k: int
    rounds_per_cell: int
    cached: bool
    steps: list[PruneStep] = field(default_factory=list)

    @property
    def recorded_rounds(self) -> int:
        return sum(s.rounds for s in self.steps)

    @property
    def used_fallback(self) -> bool:
        return any(s.fallback for s in self.steps)

    def to_dict(self) -> dict:
        return {
            "candidates": self.candidates,
            "k": self.k,
            "rounds_per_cell": self.rounds_per_cell,
            "cached": self.cached,
            "total_rounds": self.recorded_rounds,
            "iterations": [
                {**asdict(s), "totals": {str(c): v for c, v in s.totals.items()},
                 "marginals": None if s.marginals is None else {str(c): v for c, v in s.marginals.items()}}
                for s in self.steps
            ],
        }


def analytic_rounds(k: int, n_candidates: int, r: int) -> int:
    """Uncached cost of pruning: one table per level, the empty cell free."""
    return sum(((1 << m) - 1) * r for m in range(k + 1, n_candidates + 1))


def rounds_ledger(trace: PruneTrace) -> int:
    """Total simulation rounds spent pruning.

    Without the cache the recorded count must equal the analytic sum over
    every pruning level; a mismatch raises ``AssertionError``.
    """
    recorded = trace.recorded_rounds
    if not trace.cached:
        expected = analytic_rounds(trace.k, len(trace.candidates), trace.rounds_per_cell)
        if recorded != expected:
            raise AssertionError(f"ledger mismatch: recorded {recorded}, expected {expected}")
    return recorded


def _fallback_removal(table, current: list[int]) -> tuple[int, dict[int, float]]:
    """Drop the candidate whose removal costs the least mean spread."""
    full = (1 << table.m) - 1
    marg = {c: float(table.mean[full] - table.mean[full & ~(1 << i)]) for i, c in enumerate(current)}
    return min(current, key=lambda c: (marg[c], c)), marg


def prune(g: Graph, candidates: list[int], k: int, cfg: DiffusionConfig,
          cache: SpreadCache | None = None) -> tuple[list[int], PruneTrace]:
    """Remove the lowest-total-index candidate, one at a time, until ``k`` remain."""
    current = list(candidates)
    trace = PruneTrace(list(candidates), k, cfg.rounds, cache is not None)
    while len(current) > k:
        table = build_subset_table(g, current, cfg, cache)
        try:
            totals = {c: total_index(table, i) for i, c in enumerate(current)}
        except DegenerateVarianceError:
            removed, marg = _fallback_removal(table, current)
            logger.info("Var(Y)=0 over %s; falling back to marginal spread", current)
            trace.steps.append(PruneStep(list(current), {}, removed, table.simulated_rounds, True, marg))
        else:
            removed = min(current, key=lambda c: (totals[c], c))
            trace.steps.append(PruneStep(list(current), totals, removed, table.simulated_rounds))
        current.remove(removed)
    return current, trace


def sim_select(g: Graph, cfg: SimConfig, collected: SeedSet | None = None) -> tuple[SeedSet, PruneTrace]:
    """Collect ``ceil(a*k)`` seeds with the base heuristic, then prune to ``k``.

    ``collected`` lets a caller supply the over-selected set it already has.
    """
    n_cand = cfg.n_candidates
    if n_cand > g.n:
        raise ValueError(f"ceil(a*k)={n_cand} exceeds node count {g.n}")
    if collected is None:
        collected = select(cfg.base, g, n_cand, cfg.diffusion, **cfg.base_params)
    if len(collected) != n_cand:
        raise ValueError(f"base heuristic returned {len(collected)} nodes, expected {n_cand}")
    cache: SpreadCache | None = {} if cfg.reuse_cache else None
    kept, trace = prune(g, list(collected.nodes), cfg.k, cfg.diffusion, cache)
    params = {**collected.params, "a": cfg.a, "k": cfg.k}
    return SeedSet(tuple(kept), f"{collected.origin}+sim", params), trace
