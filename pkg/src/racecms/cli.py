"""Command-line entry point: ``racecms <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .core import LshSharing, SketchConfig, StorageMode
from .errors import RaceError
from .ingest import dataset_stats, load_dataset, raw_size_bytes, read_edge_list, save_dataset
from .planner import plan
from .recovery import query as sketch_query
from .sketch import build_sketch, deserialize, serialize
from .synthetic import planted_dataset


def _cmd_ingest(args: argparse.Namespace) -> int:
    ds = read_edge_list(args.edgelist, directed=not args.undirected, mode=args.mode)
    save_dataset(ds, args.output)
    st = dataset_stats(ds, sample_pairs=args.pairs, seed=args.seed)
    print(f"nodes\t{st.nodes}")
    print(f"nonzeros\t{st.nonzeros}")
    print(f"mean_edges\t{st.mean_edges:.4f}")
    sim = f"{st.mean_similarity:.6f}" if st.similarity_defined else "undefined"
    print(f"mean_similarity\t{sim}")
    print(f"raw_bytes\t{raw_size_bytes(ds)}")
    return 0


def _config_from(args: argparse.Namespace) -> SketchConfig:
    return SketchConfig(
        K=args.K, d=args.d, w=args.w, R=args.R, r=args.r, counter_bits=args.bits,
        master_seed=args.seed, storage_mode=StorageMode(args.mode),
        lsh_sharing=LshSharing(args.sharing),
    )


def _cmd_sketch(args: argparse.Namespace) -> int:
    ds = load_dataset(args.cache)
    sk = build_sketch(_config_from(args), ds, shards=harness.thread_count(args.threads))
    Path(args.output).write_bytes(serialize(sk))
    raw = raw_size_bytes(ds)
    fp = sk.memory_footprint()
    print(f"memory_footprint\t{fp}")
    print(f"inv_ratio\t{fp / raw:.6g}")
    return 0


def _cmd_query(args: argparse.Namespace) -> int:
    sk = deserialize(Path(args.sketch).read_bytes())
    ds = load_dataset(args.cache)
    j = ds.index_of(args.node)
    cand = ds.nonempty()
    if not args.include_self:
        cand = cand[cand != j]
    res = sketch_query(sk, ds[j], min(args.v, cand.size), candidates=cand)
    for rank, (idx, score) in enumerate(zip(res.neighbors, res.scores), start=1):
        print(f"{rank}\t{ds.label_of(idx)}\t{score:.6g}")
    return 0


def _cmd_plan(args: argparse.Namespace) -> int:
    planner_log = logging.getLogger("racecms.planner")
    level = planner_log.level
    planner_log.setLevel(logging.ERROR)  # the warning is printed below instead
    try:
        b = plan(args.pv, args.delta, args.r, args.N, delta_fail=args.delta_fail, v=args.v,
                 counter_bits=args.bits)
    finally:
        planner_log.setLevel(level)
    print(f"K\t{b.K}")
    print(f"epsilon\t{b.epsilon:.6g}")
    print(f"d\t{b.d}")
    print(f"w\t{b.w}")
    print(f"R\t{b.R}")
    print(f"b\t{b.b:.3f}")
    print(f"b2\t{b.b2:.3f}")
    print(f"size_bits\t{b.size_bits}")
    if not b.sublinear:
        print(f"warning: b = {b.b:.3f} >= 1, sketch is not sub-linear for this query")
    return 0


def _parse_grid(text: str | None, methods: list[str]) -> dict[str, list[dict]]:
    given = json.loads(text) if text else {}
    out = {}
    for m in methods:
        g = given.get(m, harness.DEFAULT_GRIDS[m])
        out[m] = g if isinstance(g, list) else harness.expand_grid(g)
    return out


def _cmd_eval(args: argparse.Namespace) -> int:
    ds = load_dataset(args.cache)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in harness.METHODS:
            raise RaceError(f"unknown method {m!r}; choose from {', '.join(harness.METHODS)}")
    grid_text = Path(args.grid[1:]).read_text() if args.grid and args.grid.startswith("@") else args.grid
    grids = _parse_grid(grid_text, methods)
    if args.query_file:
        labels = [int(t) for t in Path(args.query_file).read_text().split()]
        queries = np.asarray([ds.index_of(x) for x in labels], dtype=np.int64)
    else:
        queries = harness.select_queries(ds, args.queries, args.seed, threshold=args.thresholds[1])
    records = harness.run_eval(
        ds, queries, grids, v=args.v, thresholds=tuple(args.thresholds),
        strict_removal=args.strict_removal, record_timing=not args.no_timing, threads=args.threads,
    )
    if args.output == "-":
        harness.write_csv(records, sys.stdout)
    else:
        harness.write_csv(records, args.output)
        print(f"wrote {len(records)} rows to {args.output}")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    ds, queries = planted_dataset(n=args.n, n_queries=args.n_queries, neighbors=args.neighbors,
                                  universe=args.universe, mean_size=args.mean_size, seed=args.seed)
    save_dataset(ds, args.output)
    if args.query_out:
        Path(args.query_out).write_text("\n".join(str(ds.label_of(q)) for q in queries) + "\n")
    print(f"rows\t{len(ds)}")
    print(f"raw_bytes\t{raw_size_bytes(ds)}")
    return 0


def _cmd_selftest(args: argparse.Namespace) -> int:
    from .selftest import run

    return run(verbose=not args.quiet)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="racecms", description="RACE-CMS sketches for sparse nearest-neighbor search")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="parse an edge list into a dataset cache")
    s.add_argument("edgelist")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--undirected", action="store_true")
    s.add_argument("--mode", choices=["accumulate", "two_phase"], default="accumulate")
    s.add_argument("--pairs", type=int, default=100_000, help="pairs sampled for mean similarity")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_cmd_ingest)

    s = sub.add_parser("sketch", help="build a sketch from a dataset cache")
    s.add_argument("cache")
    s.add_argument("--K", type=int, default=1)
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--w", type=int, default=1000)
    s.add_argument("--R", type=int, default=2)
    s.add_argument("--r", type=int, default=1000)
    s.add_argument("--bits", type=int, default=16, choices=[8, 16, 32])
    s.add_argument("--mode", choices=[m.value for m in StorageMode], default="map")
    s.add_argument("--sharing", choices=[m.value for m in LshSharing], default="per_row_rep")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=_cmd_sketch)

    s = sub.add_parser("query", help="top-v neighbors of a node from a sketch")
    s.add_argument("sketch")
    s.add_argument("cache")
    s.add_argument("--node", type=int, required=True, help="original node label")
    s.add_argument("--v", type=int, default=20)
    s.add_argument("--include-self", action="store_true")
    s.set_defaults(func=_cmd_query)

    s = sub.add_parser("plan", help="worst-case sketch budget for a query profile")
    s.add_argument("--pv", type=float, required=True)
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--r", type=int, required=True)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--delta-fail", type=float, default=0.05)
    s.add_argument("--v", type=int, default=1)
    s.add_argument("--bits", type=int, default=16)
    s.set_defaults(func=_cmd_plan)

    s = sub.add_parser("eval", help="recall vs compression sweep, CSV out")
    s.add_argument("cache")
    s.add_argument("--methods", default="map_race,array_race,random_projection,random_sampling")
    s.add_argument("--grid", default=None, help="JSON {method: {param: [values]}} or @file")
    s.add_argument("--queries", type=int, default=500)
    s.add_argument("--query-file", default=None, help="whitespace-separated node labels")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--v", type=int, default=20)
    s.add_argument("--thresholds", type=float, nargs=2, default=[0.8, 0.9])
    s.add_argument("--strict-removal", action="store_true")
    s.add_argument("--no-timing", action="store_true", help="write 0 for timings (byte-stable CSV)")
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("-o", "--output", default="results.csv")
    s.set_defaults(func=_cmd_eval)

    s = sub.add_parser("synth", help="write a planted-neighbor synthetic dataset cache")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--query-out", default=None)
    s.add_argument("--n", type=int, default=10_000)
    s.add_argument("--n-queries", type=int, default=200)
    s.add_argument("--neighbors", type=int, default=5)
    s.add_argument("--universe", type=int, default=100_000)
    s.add_argument("--mean-size", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_cmd_synth)

    s = sub.add_parser("selftest", help="quick oracle checks")
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=_cmd_selftest)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (RaceError, OverflowError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
