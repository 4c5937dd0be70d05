"""Brute-force ground truth: exact Jaccard, scores, top-v and CMS measurements.

Deliberately O(N) per query. Scores use the same rehash-floored collision
model as the sketch so that exact and estimated values are comparable.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .core import Dataset, QueryResult, SketchConfig, SparseVector
from .errors import DomainError
from .hashing import HashPlan, cms_columns, collision_model
from .planner import StabilityProfile
from .recovery import top_v


def jaccard(x: SparseVector, y: SparseVector) -> float:
    """|x & y| / |x | y| by a merge over the two sorted ID lists."""
    a, b = x.ids, y.ids
    if a.size == 0 and b.size == 0:
        raise DomainError("Jaccard similarity of two empty sets is undefined")
    i = j = inter = 0
    la, lb = a.size, b.size
    al, bl = a.tolist(), b.tolist()
    while i < la and j < lb:
        if al[i] == bl[j]:
            inter += 1
            i += 1
            j += 1
        elif al[i] < bl[j]:
            i += 1
        else:
            j += 1
    return inter / (la + lb - inter)


def jaccard_all(ds: Dataset, q: SparseVector) -> np.ndarray:
    """Jaccard of ``q`` with every dataset row (0 for empty rows)."""
    hit = np.isin(ds.indices, q.ids, assume_unique=False)
    rows = np.repeat(np.arange(len(ds)), ds.sizes())
    inter = np.bincount(rows[hit], minlength=len(ds)).astype(np.float64)
    union = ds.sizes() + len(q) - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(union > 0, inter / np.maximum(union, 1), 0.0)
    return out


def exact_scores(ds: Dataset, q: SparseVector, K: int, r: int | None) -> np.ndarray:
    """Exact score of every row; ``r=None`` gives the raw ``J^K`` without the rehash floor."""
    if len(q) == 0:
        raise DomainError("query is empty")
    J = jaccard_all(ds, q)
    return J**K if r is None else collision_model(J, K, r)


def _candidates(ds: Dataset, exclude: Sequence[int] | None) -> np.ndarray:
    rows = ds.nonempty()
    if exclude is not None and len(exclude):
        rows = np.setdiff1d(rows, np.asarray(exclude, dtype=np.int64))
    return rows


def exact_top_v(ds: Dataset, q: SparseVector, v: int, exclude: Sequence[int] | None = None) -> QueryResult:
    """Top-``v`` non-empty rows by exact Jaccard, ties by ascending index."""
    rows = _candidates(ds, exclude)
    if v > rows.size:
        raise DomainError(f"v={v} exceeds the {rows.size} candidate rows")
    J = jaccard_all(ds, q)[rows]
    return top_v(J, v, rows)


def exact_measurements(ds: Dataset, q: SparseVector, cfg: SketchConfig, plan: HashPlan,
                       indices: Sequence[int] | np.ndarray | None = None) -> np.ndarray:
    """Noise-free (d, w) measurements: per cell, the summed scores of the rows it holds.

    ``indices`` lists the rows that were inserted (default: all non-empty rows).
    """
    rows = ds.nonempty() if indices is None else np.asarray(indices, dtype=np.int64)
    y = np.zeros((cfg.d, cfg.w))
    if rows.size == 0:
        return y
    s = exact_scores(ds, q, cfg.K, cfg.r)[rows]
    cols = cms_columns(plan, rows)
    for i in range(cfg.d):
        y[i] = np.bincount(cols[i], weights=s, minlength=cfg.w)
    return y


def stability_params(ds: Dataset, q: SparseVector, v: int, K: int, r: int,
                     exclude: Sequence[int] | None = None) -> StabilityProfile:
    """Exact (p_v, p_{v+1}, ratio, B) from the sorted score vector.

    Scores are ``s_i = collision_model(J_i, K, r)`` and ``p_i = s_i^(1/K)``,
    so ``B = sum_{i>v} sqrt(s_i / s_{v+1})``.
    """
    rows = _candidates(ds, exclude)
    if rows.size < v + 1:
        raise DomainError("need at least v + 1 candidate rows")
    s = np.sort(exact_scores(ds, q, K, r)[rows])[::-1]
    s_v, s_v1 = float(s[v - 1]), float(s[v])
    if s_v1 <= 0:
        raise DomainError("p_{v+1} must be positive")
    p_v, p_v1 = s_v ** (1.0 / K), s_v1 ** (1.0 / K)
    B = math.fsum(np.sqrt(s[v:] / s_v1).tolist())
    return StabilityProfile(p_v, p_v1, p_v1 / p_v, B, v)
