"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from .diffusion import DiffusionConfig, derive_seed
from .experiments import (SELECT_STREAM, ExperimentConfig, case_study, decompose, load_graph,
                          write_bench)
from .graph import GraphError, GraphGenSpec, dump_edge_list, generate, load_edge_list
from .heuristics import SELECTORS, ConvergenceError, SelectionError, select
from .sim import SimConfig, sim_select
from .sobol import DegenerateVarianceError, SubsetSpreadTable, build_subset_table

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("sobolim")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _graph_from_args(args) -> tuple:
    if args.graph:
        with open(args.graph, encoding="utf-8") as fh:
            return load_edge_list(fh, args.default_weight)
    if args.config:
        return load_graph(ExperimentConfig.load(args.config).graph)
    raise UsageError("need --graph or --config")


def _seeds(labels: list, tokens: list[str]) -> list[int]:
    lookup = {str(lab): i for i, lab in enumerate(labels)}
    out = []
    for t in tokens:
        for part in t.replace(",", " ").split():
            if part not in lookup:
                raise GraphError(f"seed {part} not in graph")
            out.append(lookup[part])
    return out


def _diffusion_from_args(args, rounds: int) -> DiffusionConfig:
    return DiffusionConfig(args.model, rounds, args.max_steps, derive_seed(args.seed, SELECT_STREAM),
                           args.threshold_lo, args.threshold_hi)


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, default=str), encoding="utf-8")


# --------------------------------------------------------------------------- commands


def cmd_gen(args) -> int:
    spec = GraphGenSpec(kind=args.kind, n=args.n, avg_degree=args.avg_deg, ring_degree=args.ring_degree,
                        rewire=args.rewire, weight_lo=args.weight_lo, weight_hi=args.weight_hi, seed=args.seed)
    g = generate(spec)
    if args.out == "-":
        dump_edge_list(g, sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            dump_edge_list(g, fh)
    log.info("wrote %r", g)
    return EXIT_OK


def cmd_select(args) -> int:
    g, labels = _graph_from_args(args)
    cfg = _diffusion_from_args(args, args.rounds) if args.heuristic == "grd" else None
    seeds = select(args.heuristic, g, args.k, cfg)
    line = " ".join(str(labels[v]) for v in seeds.nodes) + "\n"
    if args.out == "-":
        sys.stdout.write(line)
    else:
        Path(args.out).write_text(line, encoding="utf-8")
    return EXIT_OK


def cmd_decompose(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.table:
        with open(args.table, encoding="utf-8") as fh:
            table = SubsetSpreadTable.from_csv(fh)
    else:
        g, labels = _graph_from_args(args)
        seeds = _seeds(labels, args.seeds)
        if len(seeds) > 20:
            raise UsageError("decompose takes at most 20 seeds")
        table = build_subset_table(g, seeds, _diffusion_from_args(args, args.rounds))
    max_order = table.m if args.max_order == "all" else min(int(args.max_order), table.m)
    report = decompose(table, max_order)
    _write_json(out / "report.json", report)
    (out / "table.csv").write_text(table.to_csv(), encoding="utf-8")
    if report["closure_residual"] is not None:
        print(f"closure residual: {report['closure_residual']:.3e}")
    return EXIT_OK


def cmd_sim(args) -> int:
    g, labels = _graph_from_args(args)
    cfg = SimConfig(k=args.k, a=args.a, base=args.heuristic, diffusion=_diffusion_from_args(args, args.rounds),
                    reuse_cache=not args.no_cache)
    seeds, trace = sim_select(g, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "trace.json", trace.to_dict())
    (out / "seeds.txt").write_text(" ".join(str(labels[v]) for v in seeds.nodes) + "\n", encoding="utf-8")
    print(" ".join(str(labels[v]) for v in seeds.nodes))
    return EXIT_OK


def _experiment_config(args) -> ExperimentConfig:
    overrides = {
        "k": args.k, "a": args.a, "r_select": args.r_select, "r_eval": args.r_eval,
        "master_seed": args.seed, "output": args.out, "heuristics": args.heuristics, "model": args.model,
    }
    if getattr(args, "dump_raw", False):
        overrides["dump_raw"] = True
    if args.config:
        return ExperimentConfig.load(args.config, overrides)
    if not args.graph:
        raise UsageError("need --config or --graph")
    data = {k: v for k, v in overrides.items() if v is not None}
    data["graph"] = {"path": args.graph, "default_weight": args.default_weight}
    return ExperimentConfig.from_mapping(data)


def cmd_bench(args) -> int:
    cfg = _experiment_config(args)
    g, labels = load_graph(cfg.graph)
    rows = write_bench(g, labels, cfg, Path(cfg.output))
    for r in rows:
        print(f"{r.heuristic:>6} {r.variant:>3}  {r.mean:10.2f} +- {r.std:.2f}")
    return EXIT_OK


def cmd_case_study(args) -> int:
    cfg = _experiment_config(args)
    g, labels = load_graph(cfg.graph)
    if args.seeds:
        seeds = _seeds(labels, args.seeds)
    else:
        seeds = list(select("deg", g, cfg.k).nodes)
    report, table = case_study(g, seeds, cfg.diffusion(cfg.r_select, SELECT_STREAM))
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "report.json", report)
    (out / "table.csv").write_text(table.to_csv(), encoding="utf-8")
    rho = report["spearman"]
    print("spearman(total, marginal):", "n/a" if rho is None else f"{rho:.3f}")
    return EXIT_OK


# --------------------------------------------------------------------------- parser


def _diffusion_args(p: argparse.ArgumentParser, rounds: int = 100) -> None:
    p.add_argument("--model", choices=["ic", "lt"], default=None)
    p.add_argument("--threshold-lo", type=float, default=0.01)
    p.add_argument("--threshold-hi", type=float, default=0.20)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--rounds", type=int, default=rounds)
    p.add_argument("--seed", type=int, default=None, help="master seed")


def _graph_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", help="edge-list file")
    p.add_argument("--default-weight", type=float, default=1.0)
    p.add_argument("--config", help="YAML experiment config")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sobolim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic graph")
    p.add_argument("kind", choices=["er", "ws"])
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--avg-deg", type=float, default=10.0)
    p.add_argument("--ring-degree", type=int, default=10)
    p.add_argument("--rewire", type=float, default=0.1)
    p.add_argument("--weight-lo", type=float, default=0.4)
    p.add_argument("--weight-hi", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("select", help="run one baseline heuristic")
    _graph_args(p)
    p.add_argument("heuristic", choices=sorted(SELECTORS))
    p.add_argument("--k", type=int, required=True)
    _diffusion_args(p, rounds=1000)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("decompose", help="Sobol decomposition of a seed set or a table file")
    _graph_args(p)
    p.add_argument("--seeds", nargs="*", default=[])
    p.add_argument("--table", help="CSV table to decompose instead of simulating")
    p.add_argument("--max-order", default="2", help="integer or 'all'")
    _diffusion_args(p)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("sim", help="SIM seed selection")
    _graph_args(p)
    p.add_argument("heuristic", choices=sorted(SELECTORS))
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--a", type=float, default=2.0)
    p.add_argument("--no-cache", action="store_true")
    _diffusion_args(p)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_sim)

    for name, func, help_ in (("bench", cmd_bench, "heuristics with and without SIM"),
                              ("case-study", cmd_case_study, "total index vs marginal contribution")):
        p = sub.add_parser(name, help=help_)
        _graph_args(p)
        p.add_argument("--heuristics", default=None, help="comma-separated labels")
        p.add_argument("--k", type=int, default=None)
        p.add_argument("--a", type=float, default=None)
        p.add_argument("--r-select", type=int, default=None)
        p.add_argument("--r-eval", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--model", choices=["ic", "lt"], default=None)
        p.add_argument("--out", default=None)
        if name == "bench":
            p.add_argument("--dump-raw", action="store_true")
        else:
            p.add_argument("--seeds", nargs="*", default=[])
        p.set_defaults(func=func)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    for attr, default in (("model", "ic"), ("seed", 0)):
        if hasattr(args, attr) and getattr(args, attr) is None and args.func not in (cmd_bench, cmd_case_study):
            setattr(args, attr, default)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"sobolim: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DegenerateVarianceError, ConvergenceError) as exc:
        print(f"sobolim: numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (GraphError, SelectionError, ValueError, OSError, yaml.YAMLError, KeyError) as exc:
        print(f"sobolim: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
