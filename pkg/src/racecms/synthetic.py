"""Synthetic sparse-set data with planted high-similarity neighbors."""

from __future__ import annotations

import math

import numpy as np

from .core import Dataset


def _random_set(rng: np.random.Generator, universe: int, size: int) -> np.ndarray:
    return np.sort(rng.choice(universe, size=size, replace=False)).astype(np.uint32)


def perturb(rng: np.random.Generator, base: np.ndarray, swaps: int, universe: int) -> np.ndarray:
    """Replace ``swaps`` members of ``base`` by fresh IDs; Jaccard is (n-s)/(n+s)."""
    keep = rng.choice(base.size, size=base.size - swaps, replace=False)
    kept = base[np.sort(keep)]
    fresh: set[int] = set()
    members = set(base.tolist())
    while len(fresh) < swaps:
        c = int(rng.integers(universe))
        if c not in members:
            fresh.add(c)
    return np.sort(np.concatenate([kept, np.fromiter(fresh, dtype=np.uint32)])).astype(np.uint32)


def planted_dataset(
    n: int = 10_000,
    n_queries: int = 200,
    neighbors: int = 5,
    universe: int = 100_000,
    mean_size: int = 50,
    spread: int = 10,
    min_similarity: float = 0.9,
    seed: int = 0,
) -> tuple[Dataset, np.ndarray]:
    """Dataset of ``n`` random sets in which each of ``n_queries`` query sets
    has ``neighbors`` planted near-copies at Jaccard >= ``min_similarity``.

    Set sizes are uniform on ``mean_size +/- spread``; everything else is a
    uniformly random set, so unrelated pairs have near-zero similarity.
    Row order is shuffled. Returns the dataset and the (sorted) query rows.
    """
    lo, hi = mean_size - spread, mean_size + spread
    max_swaps = math.floor(lo * (1 - min_similarity) / (1 + min_similarity))
    if max_swaps < 1:
        raise ValueError("sets too small to plant a neighbor at this similarity")
    if n_queries * (1 + neighbors) > n:
        raise ValueError("not enough rows for the planted clusters")
    rng = np.random.default_rng(seed)
    rows: list[np.ndarray] = []
    is_query: list[bool] = []
    for _ in range(n_queries):
        q = _random_set(rng, universe, int(rng.integers(lo, hi + 1)))
        rows.append(q)
        is_query.append(True)
        limit = math.floor(q.size * (1 - min_similarity) / (1 + min_similarity))
        for _ in range(neighbors):
            rows.append(perturb(rng, q, int(rng.integers(1, limit + 1)), universe))
            is_query.append(False)
    while len(rows) < n:
        rows.append(_random_set(rng, universe, int(rng.integers(lo, hi + 1))))
        is_query.append(False)
    perm = rng.permutation(n)
    ds = Dataset.from_vectors([rows[p] for p in perm])
    queries = np.flatnonzero(np.asarray(is_query)[perm])
    return ds, queries
