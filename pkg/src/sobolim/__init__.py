"""Sobol-index decomposition of influence spread, and SIM seed pruning."""

from .diffusion import (BridgedExactIC, DiffusionConfig, SpreadEstimate, estimate_many, estimate_spread,
                        exact_ic_spread, simulate_ic, simulate_lt)
from .graph import (Graph, GraphError, GraphGenSpec, bfs_distance, generate, generate_er, generate_ws,
                    largest_connected_component, load_edge_list)
from .heuristics import (SeedSet, select, select_degree, select_degree_discount, select_eigen, select_greedy,
                         select_pi, select_sigma)
from .sim import PruneTrace, SimConfig, rounds_ledger, sim_select
from .sobol import (DegenerateVarianceError, SobolDecomposition, SubsetSpreadTable, build_exact_table,
                    build_subset_table, first_order_index, full_decomposition, higher_order_index, moments,
                    subset_first_order, total_index)

__version__ = "0.1.0"
