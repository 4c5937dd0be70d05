"""Querying: MoM cell estimates, count-min score recovery, top-v ranking."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import QueryResult, SparseVector
from .errors import DomainError, EmptyInput
from .hashing import HashPlan, cms_columns, query_buckets
from .sketch import RaceCmsSketch

MOM_MAX_GROUPS = 9


@dataclass(frozen=True)
class MomPolicy:
    """Consecutive groups of ``group_size`` values, at most ``max_groups`` of them.

    Values left over after the last full group join the last group.
    """

    group_size: int = 1
    max_groups: int | None = None

    def __post_init__(self) -> None:
        if self.group_size < 1:
            raise DomainError("group_size must be >= 1")
        if self.max_groups is not None and self.max_groups < 1:
            raise DomainError("max_groups must be >= 1")

    @classmethod
    def for_reps(cls, R: int) -> "MomPolicy":
        # plain median below 9 reps, otherwise 9 equal groups
        if R < MOM_MAX_GROUPS:
            return cls(1)
        return cls(R // MOM_MAX_GROUPS, MOM_MAX_GROUPS)

    def n_groups(self, n: int) -> int:
        g = max(1, n // self.group_size)
        return g if self.max_groups is None else min(g, self.max_groups)


def _mom_last_axis(values: np.ndarray, policy: MomPolicy) -> np.ndarray:
    n = values.shape[-1]
    if n == 0:
        raise EmptyInput("median of means of nothing")
    k = policy.n_groups(n)
    g = policy.group_size if k > 1 else n
    if g == 1 and k == n:
        return np.median(values, axis=-1)
    head = values[..., : (k - 1) * g].reshape(values.shape[:-1] + (k - 1, g)).mean(axis=-1)
    tail = values[..., (k - 1) * g:].mean(axis=-1, keepdims=True)
    return np.median(np.concatenate([head, tail], axis=-1), axis=-1)


def median_of_means(values: Sequence[float] | np.ndarray, policy: MomPolicy | None = None) -> float:
    """Median of group means; an even number of groups takes the midpoint."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise EmptyInput("median of means of nothing")
    if policy is None:
        policy = MomPolicy.for_reps(arr.size)
    return float(_mom_last_axis(arr, policy))


def cell_estimates(sk: RaceCmsSketch, q: SparseVector, policy: MomPolicy | None = None) -> np.ndarray:
    """(d, w) matrix of MoM estimates of each CMS measurement for query ``q``."""
    if len(q) == 0:
        raise EmptyInput("query is empty")
    c = sk.cfg
    policy = policy or MomPolicy.for_reps(c.R)
    buckets = query_buckets(sk.plan, q)
    ii = np.arange(c.d).reshape(c.d, 1, 1)
    cols = np.arange(c.w).reshape(1, c.w, 1)
    oo = np.arange(c.R).reshape(1, 1, c.R)
    if sk.plan.per_cell:
        b = np.transpose(buckets, (0, 2, 1))  # (d, w, R)
    else:
        b = buckets[:, None, :]  # (d, 1, R)
    counts = sk.lookup(sk.pack(ii, cols, oo, b)).astype(np.float64)
    return _mom_last_axis(counts, policy)


def recover_scores(est: np.ndarray, N: int | None, plan: HashPlan,
                   indices: Sequence[int] | np.ndarray | None = None) -> np.ndarray:
    """Count-min recovery: score of j is the minimum over rows of its cell estimate.

    Scores every index in ``range(N)``, or only ``indices`` when given (the
    output then follows the order of ``indices``).
    """
    if indices is None:
        if N is None or N < 1:
            raise DomainError("N must be >= 1")
        indices = np.arange(N)
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        return np.zeros(0)
    cols = cms_columns(plan, indices)  # (d, n)
    rows = np.arange(plan.d).reshape(-1, 1)
    return np.asarray(est)[rows, cols].min(axis=0)


def top_v(scores: Sequence[float] | np.ndarray, v: int, indices: Sequence[int] | np.ndarray | None = None) -> QueryResult:
    """The ``v`` highest scores, ties broken by ascending index.

    ``indices`` optionally names the dataset index of each score; it must be
    ascending for the tie-break to follow dataset order.
    """
    s = np.asarray(scores, dtype=np.float64)
    if not 1 <= v <= s.size:
        raise DomainError(f"v={v} must lie in [1, {s.size}]")
    idx = np.arange(s.size) if indices is None else np.asarray(indices, dtype=np.int64)
    order = np.lexsort((idx, -s))[:v]
    return QueryResult(tuple(int(i) for i in idx[order]), tuple(float(x) for x in s[order]))


def query(sk: RaceCmsSketch, q: SparseVector, v: int, N: int | None = None,
          candidates: Sequence[int] | np.ndarray | None = None,
          policy: MomPolicy | None = None) -> QueryResult:
    """Top-``v`` dataset indices for ``q`` read from the sketch alone.

    The sketch keeps no record of which indices it absorbed, so the caller
    supplies either ``N`` (score all of ``range(N)``) or an explicit sorted
    ``candidates`` array.
    """
    if v < 1:
        raise DomainError("v must be >= 1")
    est = cell_estimates(sk, q, policy)
    if candidates is not None:
        candidates = np.asarray(candidates, dtype=np.int64)
        scores = recover_scores(est, None, sk.plan, candidates)
        return top_v(scores, v, candidates)
    scores = recover_scores(est, N, sk.plan)
    return top_v(scores, v)
