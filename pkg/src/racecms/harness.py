"""Recall-vs-compression evaluation.

For every method and parameter point the compressed structure is built
from the dataset with the evaluation queries left out, each query asks for
its 20 nearest neighbors, and recall is measured against the exact Jaccard
neighbors at similarity thresholds 0.8 and 0.9.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import baselines
from .core import Dataset, LshSharing, QueryResult, SketchConfig, StorageMode
from .errors import DomainError
from .ingest import incidence_matrix, raw_size_bytes
from .recovery import query as sketch_query
from .sketch import build_sketch

log = logging.getLogger(__name__)

METHODS = {
    "array_race": "ArrayRace",
    "map_race": "MapRace",
    "random_projection": "RandomProjection",
    "random_sampling": "RandomSampling",
}

CSV_COLUMNS = [
    "method", "params", "bytes", "inv_ratio", "recall_080", "recall_090",
    "n_queries", "build_s", "query_s", "pareto",
]

DEFAULT_GRIDS: dict[str, dict[str, list]] = {
    "array_race": {"K": [1, 2], "d": [2, 3, 4, 5], "w": [100, 250, 500, 1000],
                   "R": [2, 4, 8], "r": [100, 1000], "bits": [16]},
    "map_race": {"K": [1, 2], "d": [2, 3, 4, 5], "w": [100, 250, 500, 1000],
                 "R": [2, 4, 8], "r": [100, 1000], "bits": [16]},
    "random_projection": {"m": [5, 10, 20, 50, 100, 200, 500]},
    "random_sampling": {"fraction": [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0]},
}

_PARAM_ORDER = ["K", "d", "w", "R", "r", "bits", "sharing", "m", "fraction", "seed"]


@dataclass(frozen=True)
class EvalRecord:
    method: str
    params: str
    bytes: int
    inv_ratio: float
    recall_080: float
    recall_090: float
    n_queries: int
    build_seconds: float
    query_seconds: float
    pareto: bool = False

    def row(self) -> list[str]:
        return [
            self.method, self.params, str(self.bytes), f"{self.inv_ratio:.6g}",
            f"{self.recall_080:.6f}", f"{self.recall_090:.6f}", str(self.n_queries),
            f"{self.build_seconds:.4f}", f"{self.query_seconds:.4f}", "1" if self.pareto else "0",
        ]


def recall_at(result: QueryResult | Sequence[int], truth: Iterable[int]) -> float | None:
    """Fraction of ``truth`` present in ``result``; ``None`` when truth is empty."""
    truth = set(int(t) for t in truth)
    if not truth:
        return None
    got = set(result.neighbors if isinstance(result, QueryResult) else result)
    return len(got & truth) / len(truth)


def thread_count(threads: int | None = None) -> int:
    """Worker count: explicit value, else the RACE_THREADS cap, else 1."""
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("RACE_THREADS")
    return max(1, int(env)) if env else 1


def format_params(params: Mapping) -> str:
    keys = sorted(params, key=lambda k: (_PARAM_ORDER.index(k) if k in _PARAM_ORDER else len(_PARAM_ORDER), k))
    return ";".join(f"{k}={params[k]}" for k in keys)


def expand_grid(grid: Mapping[str, Sequence]) -> list[dict]:
    """Cartesian product of a {name: values} grid, in key order."""
    names = list(grid)
    return [dict(zip(names, combo)) for combo in itertools.product(*(grid[n] for n in names))]


def similarity_rows(ds: Dataset, rows: Sequence[int], batch: int = 64) -> Iterable[tuple[int, np.ndarray]]:
    """Yield ``(row, J)`` with J the exact Jaccard of that row against every row."""
    X = incidence_matrix(ds)
    Xt = X.T.tocsr()
    sizes = ds.sizes().astype(np.float64)
    rows = np.asarray(rows, dtype=np.int64)
    for lo in range(0, rows.size, batch):
        chunk = rows[lo:lo + batch]
        inter = (X[chunk] @ Xt).toarray()
        union = sizes[chunk][:, None] + sizes[None, :] - inter
        J = np.where(union > 0, inter / np.maximum(union, 1.0), 0.0)
        for k, row in enumerate(chunk):
            yield int(row), J[k]


def select_queries(ds: Dataset, count: int, seed: int, threshold: float = 0.9) -> np.ndarray:
    """Uniform sample of rows that have another row at similarity >= threshold."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(ds.nonempty())
    chosen: list[int] = []
    for lo in range(0, order.size, 256):
        for row, J in similarity_rows(ds, order[lo:lo + 256]):
            J[row] = 0.0
            if J.max() >= threshold:
                chosen.append(row)
                if len(chosen) == count:
                    return np.sort(np.asarray(chosen, dtype=np.int64))
    if not chosen:
        raise DomainError("no row has a neighbor at the query threshold")
    log.warning("only %d eligible queries, fewer than the %d requested", len(chosen), count)
    return np.sort(np.asarray(chosen, dtype=np.int64))


@dataclass
class _Built:
    nbytes: int
    answer: Callable[[int, int], QueryResult]


def _race_params(params: Mapping, storage: StorageMode) -> SketchConfig:
    return SketchConfig(
        K=int(params.get("K", 1)), d=int(params["d"]), w=int(params["w"]), R=int(params["R"]),
        r=int(params["r"]), counter_bits=int(params.get("bits", 16)),
        master_seed=int(params.get("seed", 0)), storage_mode=storage,
        lsh_sharing=LshSharing(params.get("sharing", LshSharing.PER_ROW_REP.value)),
    )


def _build(method: str, params: Mapping, ds: Dataset, candidates: np.ndarray, threads: int) -> _Built:
    if method in ("array_race", "map_race"):
        storage = StorageMode.ARRAY if method == "array_race" else StorageMode.MAP
        sk = build_sketch(_race_params(params, storage), ds, candidates, shards=threads)

        def answer(q: int, v: int) -> QueryResult:
            return sketch_query(sk, ds[q], min(v, candidates.size), candidates=candidates)

        return _Built(sk.memory_footprint(), answer)
    if method == "random_projection":
        m, seed = int(params["m"]), int(params.get("seed", 0))
        pd = baselines.project_dataset(ds, m, seed)

        def answer(q: int, v: int) -> QueryResult:
            return baselines.query_projected(pd, baselines.project(ds[q], m, seed), v, candidates)

        return _Built(pd.nbytes, answer)
    if method == "random_sampling":
        sd = baselines.sample(ds, float(params["fraction"]), int(params.get("seed", 0)), candidates)

        def answer(q: int, v: int) -> QueryResult:
            return baselines.query_sampled(sd, ds[q], v)

        return _Built(sd.nbytes, answer)
    raise ValueError(f"unknown method {method!r}")


def mark_pareto(records: Sequence[EvalRecord]) -> list[EvalRecord]:
    """Flag records not dominated by a smaller record of the same method."""
    out = []
    for rec in records:
        dominated = any(
            o.method == rec.method and o.bytes < rec.bytes
            and o.recall_080 >= rec.recall_080 and o.recall_090 >= rec.recall_090
            for o in records
        )
        out.append(EvalRecord(**{**rec.__dict__, "pareto": not dominated}))
    return out


def run_eval(
    ds: Dataset,
    queries: Sequence[int] | np.ndarray,
    methods: Mapping[str, Sequence[Mapping]],
    v: int = 20,
    thresholds: tuple[float, float] = (0.8, 0.9),
    strict_removal: bool = False,
    record_timing: bool = True,
    threads: int | None = None,
) -> list[EvalRecord]:
    """Evaluate every (method, params) point; see module docstring.

    By default one structure per point is built with all query rows left
    out, and ground truth likewise ignores query rows. ``strict_removal``
    rebuilds per query, leaving out only that query.
    """
    queries = np.unique(np.asarray(queries, dtype=np.int64))
    if queries.size == 0:
        raise DomainError("need at least one query")
    n_threads = thread_count(threads)
    nonempty = ds.nonempty()
    excluded_all = np.setdiff1d(nonempty, queries)

    truths: dict[int, tuple[set[int], set[int]]] = {}
    for q, J in similarity_rows(ds, queries):
        pool = excluded_all if not strict_removal else np.setdiff1d(nonempty, [q])
        truths[q] = tuple(set(pool[J[pool] >= t].tolist()) for t in thresholds)
    eligible = [q for q in queries.tolist() if truths[q][1]]
    if len(eligible) < queries.size:
        log.warning("dropping %d queries without a neighbor at similarity >= %s",
                    queries.size - len(eligible), thresholds[1])
    if not eligible:
        raise DomainError("no query has a neighbor at the upper threshold")

    raw = raw_size_bytes(ds)
    records: list[EvalRecord] = []
    for method, grid in methods.items():
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        for params in grid:
            t0 = time.perf_counter()
            if strict_removal:
                built = {q: _build(method, params, ds, np.setdiff1d(nonempty, [q]), n_threads) for q in eligible}
                nbytes = max(b.nbytes for b in built.values())
            else:
                shared = _build(method, params, ds, excluded_all, n_threads)
                built = dict.fromkeys(eligible, shared)
                nbytes = shared.nbytes
            t1 = time.perf_counter()

            def run_one(q: int) -> QueryResult:
                return built[q].answer(q, v)

            if n_threads > 1:
                with ThreadPoolExecutor(max_workers=n_threads) as pool:
                    results = list(pool.map(run_one, eligible))
            else:
                results = [run_one(q) for q in eligible]
            t2 = time.perf_counter()
            per_threshold = []
            for k in range(len(thresholds)):
                vals = [recall_at(res, truths[q][k]) for q, res in zip(eligible, results)]
                vals = [x for x in vals if x is not None]
                per_threshold.append(float(np.mean(vals)) if vals else 0.0)
            records.append(EvalRecord(
                METHODS[method], format_params(params), int(nbytes), nbytes / raw,
                per_threshold[0], per_threshold[1], len(eligible),
                (t1 - t0) if record_timing else 0.0, (t2 - t1) if record_timing else 0.0,
            ))
    return mark_pareto(records)


def write_csv(records: Sequence[EvalRecord], out: str | os.PathLike | io.TextIOBase) -> None:
    if isinstance(out, (str, os.PathLike)):
        with open(out, "w", newline="", encoding="utf-8") as fh:
            write_csv(records, fh)
        return
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow(rec.row())


def read_csv(path: str | os.PathLike) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
