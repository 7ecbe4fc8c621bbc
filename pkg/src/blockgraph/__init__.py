"""Block-based graph processing with a collaborative host/device scheduler."""

from .algorithms import (
    afforest_components,
    bfs,
    pagerank,
    prepare_triangle_grid,
    sv_components,
    triangle_count,
)
from .core import AlgorithmSpec, AttributeStore, Block, BlockList, Graph, LevelQueue, build_csr
from .errors import (
    BlockGraphError,
    ConfigError,
    ContractError,
    GraphFormatError,
    KernelError,
    ParseError,
    RangeError,
)
from .io import degree_relabel, load_graph, parse_edge_list, read_binary, write_binary
from .partition import BlockGrid, optimal_1d_cuts, partition, symmetric_cuts
from .runtime import RunConfig, RunStats, run

__version__ = "0.1.0"

__all__ = [
    "AlgorithmSpec",
    "AttributeStore",
    "Block",
    "BlockGraphError",
    "BlockGrid",
    "BlockList",
    "ConfigError",
    "ContractError",
    "Graph",
    "GraphFormatError",
    "KernelError",
    "LevelQueue",
    "ParseError",
    "RangeError",
    "RunConfig",
    "RunStats",
    "afforest_components",
    "bfs",
    "build_csr",
    "degree_relabel",
    "load_graph",
    "optimal_1d_cuts",
    "pagerank",
    "parse_edge_list",
    "partition",
    "prepare_triangle_grid",
    "read_binary",
    "run",
    "sv_components",
    "symmetric_cuts",
    "triangle_count",
    "write_binary",
]
