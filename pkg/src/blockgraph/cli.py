"""Command-line driver: convert, run, bench, partition-stats, generate.

Exit codes: 0 ok, 2 I/O or format problem, 3 bad configuration,
4 kernel failure.
"""

from __future__ import annotations

import argparse
import json
import re
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import io as gio
from .algorithms import REGISTRY, afforest_components
from .errors import BlockGraphError, ConfigError, ContractError, KernelError, RangeError
from .generators import erdos_renyi, rmat
from .oracle import oracle_components
from .partition import default_parts, partition
from .runtime import MODES, RunConfig, RunStats

SCHEMA = 1
EXIT_IO, EXIT_CONFIG, EXIT_KERNEL = 2, 3, 4
ORACLE_SOURCE_LIMIT = 20000
_TEXT_SUFFIXES = {".tsv", ".txt", ".el", ".edges", ".mtx", ".csv"}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def parse_bytes(text: str) -> int:
    """``"512M"`` -> 536870912.  Plain integers are bytes."""
    m = re.fullmatch(r"\s*(\d+(?:\.\d+)?)\s*([kKmMgGtT]?)i?[bB]?\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"not a byte size: {text!r}")
    scale = {"": 1, "k": 1 << 10, "m": 1 << 20, "g": 1 << 30, "t": 1 << 40}[m.group(2).lower()]
    return int(float(m.group(1)) * scale)


def _jsonable(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(record: dict, fmt: str, out=None) -> None:
    out = out or sys.stdout
    record = {"schema": SCHEMA, **record}
    if fmt == "json":
        out.write(json.dumps(record, default=_jsonable, sort_keys=True) + "\n")
        return
    # same values as the json record, one per line
    flat = json.loads(json.dumps(record, default=_jsonable))
    for key in sorted(flat):
        val = flat[key]
        if isinstance(val, dict):
            for sub in sorted(val):
                out.write(f"{key}.{sub}: {json.dumps(val[sub])}\n")
        else:
            out.write(f"{key}: {json.dumps(val)}\n")
    out.write("\n")


def _load(path, args=None):
    parse_opts = {}
    if args is not None and getattr(args, "one_indexed", False):
        parse_opts["one_indexed"] = True
    t0 = time.perf_counter()
    try:
        graph = gio.load_graph(path, **parse_opts)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from exc
    return graph, time.perf_counter() - t0


def _config(args) -> RunConfig:
    kwargs = {"mode": args.mode, "seed": args.seed, "cutoff_fraction": args.cutoff}
    if args.threads is not None:
        kwargs["host_workers"] = args.threads
    if args.device_lanes is not None:
        kwargs["device_lanes"] = args.device_lanes
    if args.device_mem is not None:
        kwargs["arena_bytes"] = args.device_mem
    if args.lane_width is not None:
        kwargs["device_lane_width"] = args.lane_width
    return RunConfig(**kwargs)


def default_source(graph, seed: int = 1) -> int:
    """Smallest vertex id of the largest connected component."""
    if graph.n == 0:
        raise RangeError("empty graph has no source vertex")
    if graph.n <= ORACLE_SOURCE_LIMIT:
        labels = oracle_components(graph)
    else:
        cfg = RunConfig(mode="host_only", host_workers=1, device_lanes=0, seed=seed)
        labels = afforest_components(graph, partition(graph, 1), cfg).labels
    ids, counts = np.unique(labels, return_counts=True)
    biggest = ids[counts == counts.max()]
    return int(np.flatnonzero(np.isin(labels, biggest))[0])


def _prepare(args):
    algo = REGISTRY[args.algo]
    graph, load_s = _load(args.graph, args)
    config = _config(args)
    p = args.blocks or default_parts(config.host_workers)
    t0 = time.perf_counter()
    work_graph, grid = algo.prepare(graph, p, args.partitioner)
    part_s = time.perf_counter() - t0
    extra = {}
    if algo.needs_source:
        source = args.source if args.source is not None else default_source(graph, args.seed)
        if not 0 <= source < graph.n:
            raise CliError(f"source {source} outside [0, {graph.n})", EXIT_CONFIG)
        extra["source"] = source
    base = {
        "algo": algo.name,
        "graph": str(args.graph),
        "n": graph.n,
        "m": graph.m,
        "p": grid.p,
        "mode": config.mode,
        "host_workers": config.host_workers,
        "device_lanes": config.device_lanes,
        "arena_bytes": config.arena_bytes,
        "load_seconds": load_s,
        "partition_seconds": part_s,
        **extra,
    }
    return algo, work_graph, grid, config, extra, base


def _execute(algo, graph, grid, config, extra):
    try:
        return algo.execute(graph, grid, config, **extra)
    except (ConfigError, ContractError, RangeError) as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    except KernelError as exc:
        raise CliError(str(exc), EXIT_KERNEL) from exc
    except BlockGraphError as exc:
        raise CliError(str(exc), EXIT_KERNEL) from exc


def _stats_record(stats: RunStats) -> dict:
    out = stats.as_dict()
    out.pop("iteration_seconds")
    return out


def cmd_convert(args) -> int:
    graph, _ = _load(args.input, args)
    out = Path(args.output)
    to = args.to or ("text" if out.suffix.lower() in _TEXT_SUFFIXES else "binary")
    try:
        if to == "binary":
            gio.write_binary(graph, out)
        else:
            gio.write_edge_list(graph, out)
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc}", EXIT_IO) from exc
    _emit({"command": "convert", "output": str(out), "format": to, "n": graph.n, "m": graph.m}, args.format)
    return 0


def cmd_run(args) -> int:
    algo, graph, grid, config, extra, base = _prepare(args)
    res = _execute(algo, graph, grid, config, extra)
    _emit({
        "command": "run",
        **base,
        "kernel_seconds": res.stats.kernel_seconds,
        "result": algo.summarize(res),
        "stats": _stats_record(res.stats),
    }, args.format)
    return 0


def bench_summary(times: list[float]) -> dict:
    return {"min": min(times), "median": statistics.median(times), "max": max(times)}


def cmd_bench(args) -> int:
    if args.repeat < 1:
        raise CliError("--repeat must be >= 1", EXIT_CONFIG)
    algo, graph, grid, config, extra, base = _prepare(args)
    for _ in range(args.warmup):
        _execute(algo, graph, grid, config, extra)
    times, prints = [], []
    for i in range(args.repeat):
        res = _execute(algo, graph, grid, config, extra)
        times.append(res.stats.kernel_seconds)
        prints.append(algo.fingerprint(res))
        _emit({
            "command": "bench", "record": "run", "run": i, **base,
            "kernel_seconds": res.stats.kernel_seconds,
            "copy_seconds": res.stats.copy_seconds,
            "stats": _stats_record(res.stats),
        }, args.format)
    consistent = all(fp == prints[0] for fp in prints[1:])
    _emit({
        "command": "bench", "record": "summary", **base,
        "repeat": args.repeat, "warmup": args.warmup,
        "kernel_seconds": bench_summary(times),
        "result": algo.summarize(res),
        "results_identical": consistent,
    }, args.format)
    if not consistent:
        print("error: results differ between runs", file=sys.stderr)
        return EXIT_KERNEL
    return 0


def cmd_partition_stats(args) -> int:
    graph, _ = _load(args.graph, args)
    p = args.blocks or default_parts(args.threads or 1)
    grid = partition(graph, p, args.partitioner)
    sizes = [b.num_edges for b in grid.blocks]
    _emit({
        "command": "partition-stats", "n": graph.n, "m": graph.m, "p": p,
        "partitioner": args.partitioner,
        "cuts": grid.cuts.tolist(),
        "block_edges": sizes,
        "empty_blocks": sum(1 for s in sizes if s == 0),
        "load_imbalance": grid.load_imbalance(),
    }, args.format)
    return 0


def cmd_generate(args) -> int:
    if args.kind == "rmat":
        graph = rmat(args.scale, args.edge_factor, seed=args.seed)
    else:
        graph = erdos_renyi(args.n, args.prob, seed=args.seed)
    out = Path(args.output)
    try:
        if out.suffix.lower() in _TEXT_SUFFIXES:
            gio.write_edge_list(graph, out)
        else:
            gio.write_binary(graph, out)
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc}", EXIT_IO) from exc
    _emit({"command": "generate", "output": str(out), "n": graph.n, "m": graph.m}, args.format)
    return 0


def _add_run_flags(sp):
    sp.add_argument("algo", choices=sorted(REGISTRY))
    sp.add_argument("graph")
    sp.add_argument("--mode", choices=MODES, default="collaborative")
    sp.add_argument("--blocks", "-p", type=int, default=None, help="parts per dimension")
    sp.add_argument("--threads", type=int, default=None, help="host workers")
    sp.add_argument("--device-lanes", type=int, default=None)
    sp.add_argument("--lane-width", type=int, default=None, help="threads per device lane")
    sp.add_argument("--device-mem", type=parse_bytes, default=None, help="arena budget, e.g. 512M")
    sp.add_argument("--cutoff", type=float, default=0.0, help="heaviest fraction reserved for lanes")
    sp.add_argument("--source", type=int, default=None)
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--partitioner", choices=("2d", "1d"), default="2d")
    sp.add_argument("--one-indexed", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blockgraph", description="Block-based graph processing")
    parser.add_argument("--format", choices=("json", "text"), default="json")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "text"), default=argparse.SUPPRESS)

    sp = sub.add_parser("convert", parents=[common], help="edge list <-> binary")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--to", choices=("binary", "text"), default=None)
    sp.add_argument("--one-indexed", action="store_true")
    sp.set_defaults(func=cmd_convert)

    sp = sub.add_parser("run", parents=[common], help="run one algorithm once")
    _add_run_flags(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("bench", parents=[common], help="repeat a run and report min/median/max")
    _add_run_flags(sp)
    sp.add_argument("--repeat", type=int, default=10)
    sp.add_argument("--warmup", type=int, default=1, help="untimed runs first (JIT)")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("partition-stats", parents=[common], help="block sizes for a partition")
    sp.add_argument("graph")
    sp.add_argument("--blocks", "-p", type=int, default=None)
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--partitioner", choices=("2d", "1d"), default="2d")
    sp.add_argument("--one-indexed", action="store_true")
    sp.set_defaults(func=cmd_partition_stats)

    sp = sub.add_parser("generate", parents=[common], help="write a seeded random graph")
    sp.add_argument("kind", choices=("rmat", "er"))
    sp.add_argument("output")
    sp.add_argument("--scale", type=int, default=10)
    sp.add_argument("--edge-factor", type=int, default=16)
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--prob", type=float, default=0.05)
    sp.add_argument("--seed", type=int, default=1)
    sp.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
