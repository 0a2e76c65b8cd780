"""Experiment drivers behind the CLI: benchmark, case study and decomposition reports."""

from __future__ import annotations

import csv
import io
import json
import logging
import platform
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml
from scipy.stats import spearmanr

from .diffusion import DiffusionConfig, derive_seed, estimate_many
from .graph import (Graph, GraphError, GraphGenSpec, bfs_distance, generate, largest_connected_component,
                    load_edge_list, randomize_weights)
from .heuristics import SELECTORS, select
from .sim import SimConfig, sim_select
from .sobol import SubsetSpreadTable, build_subset_table, full_decomposition, higher_order_index

logger = logging.getLogger(__name__)

SELECT_STREAM = "select"
EVAL_STREAM = "eval"


@dataclass
class ExperimentConfig:
    """Everything one run needs. ``graph`` is either ``{"path": ...}`` or
    ``{"generate": {...GraphGenSpec fields}}``."""

    graph: dict = field(default_factory=lambda: {"generate": {}})
    model: str = "ic"
    threshold_lo: float = 0.01
    threshold_hi: float = 0.20
    max_steps: int | None = None
    heuristics: list[str] = field(default_factory=lambda: ["deg"])
    heuristic_params: dict = field(default_factory=dict)
    k: int = 5
    a: float = 2.0
    r_select: int = 100
    r_eval: int = 1000
    grd_rounds: int = 1000
    reuse_cache: bool = True
    master_seed: int = 0
    output: str = "out"
    dump_raw: bool = False

    def __post_init__(self):
        unknown = [h for h in self.heuristics if h not in SELECTORS]
        if unknown:
            raise ValueError(f"unknown heuristics {unknown}; choose from {sorted(SELECTORS)}")
        if self.r_eval < 1 or self.r_select < 1:
            raise ValueError("round counts must be positive")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        data = dict(data)
        # nested diffusion section is flattened onto the top level
        diff = data.pop("diffusion", None) or {}
        for key in ("model", "threshold_lo", "threshold_hi", "max_steps"):
            if key in diff:
                data.setdefault(key, diff[key])
        names = {f.name for f in fields(cls)}
        extra = set(data) - names
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        if isinstance(data.get("heuristics"), str):
            data["heuristics"] = [h.strip() for h in data["heuristics"].split(",") if h.strip()]
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path, overrides: Mapping[str, Any] | None = None) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ValueError("config must be a mapping")
        data.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_mapping(data)

    def diffusion(self, rounds: int, stream: str) -> DiffusionConfig:
        return DiffusionConfig(self.model, rounds, self.max_steps, derive_seed(self.master_seed, stream),
                               self.threshold_lo, self.threshold_hi)


def load_graph(spec: Mapping[str, Any]) -> tuple[Graph, list]:
    """Build the experiment graph; returns it with each internal node's external label."""
    spec = dict(spec)
    if "generate" in spec:
        gen = GraphGenSpec(**(spec["generate"] or {}))
        g = generate(gen)
        labels: list = list(range(g.n))
    elif "path" in spec:
        with open(spec["path"], encoding="utf-8") as fh:
            g, labels = load_edge_list(fh, spec.get("default_weight", 1.0))
        if "weight_lo" in spec or "weight_hi" in spec:
            lo = spec.get("weight_lo", 0.0)
            g = randomize_weights(g, lo, spec.get("weight_hi", lo), spec.get("weight_seed", 0))
    else:
        raise GraphError("graph section needs 'generate' or 'path'")
    if spec.get("lcc", False):
        g, keep = largest_connected_component(g)
        labels = [labels[i] for i in keep.tolist()]
    return g, labels


def environment_stamp() -> dict:
    import numba
    import scipy

    return {
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def _selection_params(cfg: ExperimentConfig, label: str) -> dict:
    return dict(cfg.heuristic_params.get(label, {}) or {})


# --------------------------------------------------------------------------- bench


@dataclass
class BenchRow:
    heuristic: str
    variant: str
    mean: float
    std: float
    rounds: int
    seeds: tuple[int, ...]
    collect_s: float
    prune_s: float
    eval_s: float


def run_bench(g: Graph, cfg: ExperimentConfig) -> tuple[list[BenchRow], dict, dict[str, np.ndarray]]:
    """Each heuristic with (W) and without (W/O) SIM, evaluated on a separate stream.

    Returns the rows, the pruning traces and the raw cascade sizes per row.
    """
    sel_cfg = cfg.diffusion(cfg.r_select, SELECT_STREAM)
    grd_cfg = cfg.diffusion(cfg.grd_rounds, SELECT_STREAM)
    eval_cfg = cfg.diffusion(cfg.r_eval, EVAL_STREAM)
    sim_cfg_base = dict(k=cfg.k, a=cfg.a, diffusion=sel_cfg, reuse_cache=cfg.reuse_cache)
    rows, traces, raw = [], {}, {}
    for label in cfg.heuristics:
        params = _selection_params(cfg, label)
        try:
            t0 = time.perf_counter()
            plain = select(label, g, cfg.k, grd_cfg, **params)
            t1 = time.perf_counter()
            sim_cfg = SimConfig(base=label, base_params=params, **sim_cfg_base)
            collected = select(label, g, sim_cfg.n_candidates, grd_cfg, **params)
            t2 = time.perf_counter()
            pruned, trace = sim_select(g, sim_cfg, collected)
            t3 = time.perf_counter()
        except Exception:
            logger.error("heuristic %r failed", label)
            raise
        traces[label] = trace.to_dict()
        for variant, seeds, collect_s, prune_s in (("W/O", plain, t1 - t0, 0.0), ("W", pruned, t2 - t1, t3 - t2)):
            t4 = time.perf_counter()
            est = estimate_many(g, [list(seeds.nodes)], eval_cfg, keep_sizes=True)[0]
            t5 = time.perf_counter()
            rows.append(BenchRow(label, variant, est.mean, est.std, est.rounds, tuple(seeds.nodes),
                                 collect_s, prune_s, t5 - t4))
            raw[f"{label}:{variant}"] = est.sizes
            logger.info("%s %s: %.2f +- %.2f", label, variant, est.mean, est.std)
    return rows, traces, raw


BENCH_COLUMNS = ["heuristic", "variant", "mean", "std", "rounds", "seeds", "collect_s", "prune_s", "eval_s"]
TIMING_COLUMNS = {"collect_s", "prune_s", "eval_s"}


def bench_csv(rows: Sequence[BenchRow], labels: Sequence | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)
    for r in rows:
        seeds = [labels[s] if labels else s for s in r.seeds]
        w.writerow([r.heuristic, r.variant, f"{r.mean:.6f}", f"{r.std:.6f}", r.rounds, " ".join(map(str, seeds)),
                    f"{r.collect_s:.6f}", f"{r.prune_s:.6f}", f"{r.eval_s:.6f}"])
    return buf.getvalue()


def write_bench(g: Graph, labels: list, cfg: ExperimentConfig, out_dir: Path) -> list[BenchRow]:
    out_dir.mkdir(parents=True, exist_ok=True)
    rows, traces, raw = run_bench(g, cfg)
    (out_dir / "bench.csv").write_text(bench_csv(rows, labels), encoding="utf-8")
    report = {
        "config": asdict(cfg),
        "graph": {"n": g.n, "edges": g.num_edges},
        "rows": [asdict(r) for r in rows],
        "environment": environment_stamp(),
    }
    (out_dir / "report.json").write_text(json.dumps(report, indent=2), encoding="utf-8")
    (out_dir / "trace.json").write_text(json.dumps(traces, indent=2), encoding="utf-8")
    if cfg.dump_raw:
        with open(out_dir / "raw.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row", "round", "size"])
            for key, sizes in raw.items():
                for i, s in enumerate(sizes.tolist()):
                    w.writerow([key, i, s])
    return rows


# --------------------------------------------------------------------------- case study and decomposition


def case_study(g: Graph, seeds: Sequence[int], cfg: DiffusionConfig,
               table: SubsetSpreadTable | None = None) -> tuple[dict, SubsetSpreadTable]:
    """Per-seed total index against marginal contribution, and pairwise interaction vs distance."""
    seeds = [int(s) for s in seeds]
    if not 1 <= len(seeds) <= 10:
        raise ValueError("case study takes between 1 and 10 seeds")
    for s in seeds:
        if not 0 <= s < g.n:
            raise GraphError(f"seed {s} not in graph")
    if table is None:
        table = build_subset_table(g, seeds, cfg)
    dec = full_decomposition(table, max_order=1)
    full = (1 << table.m) - 1
    per_seed = []
    for i, c in enumerate(table.candidates):
        marginal = float(table.mean[full] - table.mean[full & ~(1 << i)])
        per_seed.append({"node": c, "total": dec.total[c], "marginal": marginal,
                         "marginal_std": float(np.hypot(table.std[full], table.std[full & ~(1 << i)]))})
    rho = None
    if len(per_seed) > 1:
        stat = spearmanr([p["total"] for p in per_seed], [p["marginal"] for p in per_seed]).statistic
        rho = None if np.isnan(stat) else float(stat)
    memo: dict[int, float] = {}
    pairs = []
    for i in range(table.m):
        for j in range(i + 1, table.m):
            s_h = higher_order_index(table.mean, (1 << i) | (1 << j), memo)
            d = bfs_distance(g, table.candidates[i], table.candidates[j])
            pairs.append({"pair": [table.candidates[i], table.candidates[j]], "second_order": s_h,
                          "second_order_variance": s_h * dec.var_y, "distance": d})
    pairs.sort(key=lambda p: (float("inf") if p["distance"] is None else p["distance"], p["pair"]))
    report = {"seeds": per_seed, "spearman": rho, "pairs": pairs, "mean_y": dec.mean_y, "var_y": dec.var_y}
    return report, table


def decompose(table: SubsetSpreadTable, max_order: int = 2) -> dict:
    return full_decomposition(table, max_order).to_dict()
