"""Fast oracle checks run by ``racecms selftest``; nonzero exit on any failure."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .core import Dataset, SketchConfig, StorageMode, make_sparse_vector
from .hashing import HashPlan, collision_model, minhash_many
from .ingest import parse_edge_list, raw_size_bytes
from .oracle import exact_top_v, jaccard
from .planner import choose_k, memory_exponent, resolution_epsilon
from .recovery import median_of_means, query
from .sketch import build_sketch, deserialize, serialize


def _toy_graph() -> Dataset:
    return parse_edge_list(["0 1", "0 2", "1 2"])


def _check_jaccard() -> bool:
    return jaccard(make_sparse_vector([1, 2, 3]), make_sparse_vector([2, 3, 4])) == 0.5


def _check_minhash_rate() -> bool:
    x, y = make_sparse_vector(range(0, 60)), make_sparse_vector(range(20, 80))
    J = jaccard(x, y)
    seeds = np.arange(1, 4001, dtype=np.uint64) * np.uint64(0x9E3779B97F4A7C15)
    rate = float(np.mean(minhash_many(seeds, x) == minhash_many(seeds, y)))
    return abs(rate - J) <= 4 * math.sqrt(J * (1 - J) / seeds.size)


def _check_collision_model() -> bool:
    return math.isclose(collision_model(0.5, 2, 4), 0.25 + 0.75 / 4)


def _check_planner() -> bool:
    b, _ = memory_exponent(0.9, 0.5, 4)
    return (choose_k(1000.0, 0.5) == 20 and round(b, 3) == 4.912
            and math.isclose(resolution_epsilon(0.9, 0.5, 1), 0.45))


def _check_mom() -> bool:
    return median_of_means([1.0, 100.0, 2.0]) == 2.0


def _check_raw_size() -> bool:
    return raw_size_bytes(_toy_graph()) == 7


def _check_toy_query() -> bool:
    ds = Dataset.from_vectors([[1, 2, 3, 4], [1, 2, 3, 5], [7, 8, 9], [1, 2, 3, 4, 6]])
    cand = np.array([1, 2, 3])
    for mode in StorageMode:
        cfg = SketchConfig(K=1, d=3, w=64, R=16, r=64, master_seed=7, storage_mode=mode)
        sk = build_sketch(cfg, ds, cand)
        if query(sk, ds[0], 1, candidates=cand).neighbors != exact_top_v(ds, ds[0], 1, exclude=[0]).neighbors:
            return False
        if deserialize(serialize(sk)) != sk:
            return False
    return True


CHECKS: dict[str, Callable[[], bool]] = {
    "jaccard merge": _check_jaccard,
    "minhash collision rate": _check_minhash_rate,
    "collision model floor": _check_collision_model,
    "planner worked example": _check_planner,
    "median of means": _check_mom,
    "raw size of toy graph": _check_raw_size,
    "toy query and round trip": _check_toy_query,
}


def run(verbose: bool = True) -> int:
    failed = 0
    for name, check in CHECKS.items():
        try:
            ok = bool(check())
        except Exception as exc:  # report, keep going
            ok = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        failed += not ok
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return 1 if failed else 0
