"""MinHash LSH, K-wise concatenation with rehash to ``r`` buckets, CMS hashes.

Every hash here is built from the 64-bit MurmurHash3 finalizer ``fmix64``
applied to numpy ``uint64`` arrays, so whole batches of sets can be hashed
without Python loops. Seeds are derived from the master seed by chaining
``fmix64`` over a (kind, index...) tuple, so any slot's seed can be
recomputed independently of the others.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LshSharing, SketchConfig, SparseVector
from .errors import DomainError, EmptyInput

_C1 = np.uint64(0xFF51AFD7ED558CCD)
_C2 = np.uint64(0xC4CEB9FE1A85EC53)
_S33 = np.uint64(33)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_ID_SALT = np.uint64(0x243F6A8885A308D3)

# seed-derivation domains
KIND_MINHASH = 1
KIND_REHASH = 2
KIND_CMS = 3
KIND_PROJECTION = 4
KIND_AUX = 5


def fmix64(h: np.ndarray) -> np.ndarray:
    """MurmurHash3 64-bit finalizer, elementwise on uint64 (wrapping)."""
    h = np.array(h, dtype=np.uint64, copy=True, ndmin=1)
    with np.errstate(over="ignore"):
        h ^= h >> _S33
        h *= _C1
        h ^= h >> _S33
        h *= _C2
        h ^= h >> _S33
    return h


def id_keys(ids: np.ndarray) -> np.ndarray:
    """Seed-independent pre-mix of element IDs; reused across all seeds."""
    return fmix64(np.asarray(ids, dtype=np.uint64) ^ _ID_SALT)


def mix(seed: int | np.ndarray, key: np.ndarray) -> np.ndarray:
    """Seeded 64-bit hash of pre-mixed ID keys (broadcasting)."""
    return fmix64(np.asarray(seed, dtype=np.uint64) ^ key)


def derive_seeds(master_seed: int, kind: int, shape: tuple[int, ...]) -> np.ndarray:
    """Seeds for every index tuple of ``shape`` under one derivation domain."""
    with np.errstate(over="ignore"):
        h = fmix64(np.uint64(master_seed) ^ (np.uint64(kind) * _GOLDEN))
        out = np.broadcast_to(h, shape).copy() if shape else h.copy()
        for axis, n in enumerate(shape):
            idx = np.arange(1, n + 1, dtype=np.uint64)
            idx = idx.reshape((1,) * axis + (n,) + (1,) * (len(shape) - axis - 1))
            out = fmix64(out ^ (idx * _GOLDEN))
    return out.reshape(shape)


@dataclass(frozen=True, eq=False)
class HashPlan:
    """All hash seeds for one sketch, derived from ``master_seed``.

    ``minhash_seeds`` has shape (d, R, K) for per-row sharing and
    (d, R, w, K) for per-cell LSH; ``rehash_seeds`` drops the K axis;
    ``cms_seeds`` has shape (d,).
    """

    K: int
    d: int
    w: int
    R: int
    r: int
    sharing: LshSharing
    minhash_seeds: np.ndarray
    rehash_seeds: np.ndarray
    cms_seeds: np.ndarray

    @classmethod
    def from_config(cls, cfg: SketchConfig) -> "HashPlan":
        sharing = LshSharing(cfg.lsh_sharing)
        slot = (cfg.d, cfg.R) if sharing is LshSharing.PER_ROW_REP else (cfg.d, cfg.R, cfg.w)
        mh = derive_seeds(cfg.master_seed, KIND_MINHASH, slot + (cfg.K,))
        rh = derive_seeds(cfg.master_seed, KIND_REHASH, slot)
        cm = derive_seeds(cfg.master_seed, KIND_CMS, (cfg.d,))
        for a in (mh, rh, cm):
            a.setflags(write=False)
        return cls(cfg.K, cfg.d, cfg.w, cfg.R, cfg.r, sharing, mh, rh, cm)

    @property
    def per_cell(self) -> bool:
        return self.sharing is LshSharing.PER_CELL

    def slot_seeds(self, i: int, o: int, col: int | None = None) -> tuple[np.ndarray, np.uint64]:
        if self.per_cell:
            if col is None:
                raise ValueError("per-cell LSH needs a column")
            return self.minhash_seeds[i, o, col], self.rehash_seeds[i, o, col]
        if col is not None:
            raise ValueError("column given for per-row LSH sharing")
        return self.minhash_seeds[i, o], self.rehash_seeds[i, o]


def _ids_of(x: SparseVector | np.ndarray) -> np.ndarray:
    ids = x.ids if isinstance(x, SparseVector) else np.asarray(x)
    if ids.size == 0:
        raise EmptyInput("cannot hash an empty set")
    return ids


def minhash(seed: int, x: SparseVector) -> int:
    """Minimum over the set of the seeded 64-bit hash of each ID."""
    return int(mix(seed, id_keys(_ids_of(x))).min())


def minhash_many(seeds: np.ndarray, x: SparseVector) -> np.ndarray:
    """MinHash of one set under an array of seeds (any shape)."""
    keys = id_keys(_ids_of(x))
    seeds = np.asarray(seeds, dtype=np.uint64)
    out = mix(seeds.reshape(-1, 1), keys.reshape(1, -1)).min(axis=1)
    return out.reshape(seeds.shape)


def combine(rehash_seeds: np.ndarray, minhashes: np.ndarray, r: int) -> np.ndarray:
    """Hash K-tuples (last axis of ``minhashes``) into ``[0, r)``."""
    acc = np.array(rehash_seeds, dtype=np.uint64, copy=True)
    for t in range(minhashes.shape[-1]):
        acc = fmix64(acc ^ minhashes[..., t]).reshape(acc.shape)
    return (acc % np.uint64(r)).astype(np.int64)


def lsh_bucket(plan: HashPlan, i: int, o: int, x: SparseVector, col: int | None = None) -> int:
    """Bucket of ``x`` in the ACE array at row ``i``, rep ``o`` (and ``col`` for per-cell LSH)."""
    seeds, rseed = plan.slot_seeds(i, o, col)
    return int(combine(rseed, minhash_many(seeds, x), plan.r))


def query_buckets(plan: HashPlan, x: SparseVector) -> np.ndarray:
    """Buckets of one set in every LSH slot: shape (d, R) or (d, R, w)."""
    mh = minhash_many(plan.minhash_seeds, x)
    return combine(plan.rehash_seeds, mh, plan.r)


def csr_minhash(row_seeds: np.ndarray, indptr: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """MinHash of every CSR row, each row under its own seed.

    ``row_seeds`` is a scalar or an (n,) array; ``keys`` are pre-mixed IDs.
    Rows must be non-empty.
    """
    sizes = np.diff(indptr)
    seeds = np.asarray(row_seeds, dtype=np.uint64)
    per_id = seeds if seeds.ndim == 0 else np.repeat(seeds, sizes)
    vals = mix(per_id, keys)
    return np.minimum.reduceat(vals, indptr[:-1]) if vals.size else np.empty(0, dtype=np.uint64)


def batch_buckets(plan: HashPlan, indptr: np.ndarray, ids: np.ndarray, columns: np.ndarray | None = None) -> np.ndarray:
    """Buckets for a CSR batch of non-empty sets: shape (d, R, n).

    Per-cell LSH needs ``columns`` of shape (d, n) since the slot depends on
    the CMS column each set lands in.
    """
    indptr = np.asarray(indptr, dtype=np.int64)
    n = indptr.size - 1
    if n and np.any(np.diff(indptr) == 0):
        raise EmptyInput("cannot hash an empty set")
    keys = id_keys(ids)
    if not plan.per_cell:
        return _shared_buckets(plan, indptr, keys)
    out = np.empty((plan.d, plan.R, n), dtype=np.int64)
    for i in range(plan.d):
        for o in range(plan.R):
            mh = np.empty((n, plan.K), dtype=np.uint64)
            if plan.per_cell:
                if columns is None:
                    raise ValueError("per-cell LSH needs columns")
                seeds = plan.minhash_seeds[i, o][columns[i]]
                rseed = plan.rehash_seeds[i, o][columns[i]]
                for t in range(plan.K):
                    mh[:, t] = csr_minhash(seeds[:, t], indptr, keys)
            else:
                for t in range(plan.K):
                    mh[:, t] = csr_minhash(plan.minhash_seeds[i, o, t], indptr, keys)
                rseed = np.full(n, plan.rehash_seeds[i, o], dtype=np.uint64)
            out[i, o] = combine(rseed, mh, plan.r)
    return out


_CHUNK_ELEMENTS = 1 << 22


def _shared_buckets(plan: HashPlan, indptr: np.ndarray, keys: np.ndarray) -> np.ndarray:
    # all (row, rep, power) seeds at once, in slabs of ~4M hash evaluations
    n = indptr.size - 1
    seeds = plan.minhash_seeds.reshape(-1)
    mh = np.empty((seeds.size, n), dtype=np.uint64)
    if n:
        step = max(1, _CHUNK_ELEMENTS // max(1, keys.size))
        for lo in range(0, seeds.size, step):
            vals = mix(seeds[lo:lo + step, None], keys[None, :])
            mh[lo:lo + step] = np.minimum.reduceat(vals, indptr[:-1], axis=1)
    mh = mh.reshape(plan.d, plan.R, plan.K, n).transpose(0, 1, 3, 2)
    rseed = np.broadcast_to(plan.rehash_seeds[:, :, None], (plan.d, plan.R, n))
    return combine(rseed, mh, plan.r)


def cms_columns(plan: HashPlan, j: np.ndarray | int) -> np.ndarray:
    """CMS columns of dataset indices ``j`` in every row: shape (d, n)."""
    j = np.atleast_1d(np.asarray(j, dtype=np.uint64))
    keys = id_keys(j)
    h = mix(plan.cms_seeds.reshape(-1, 1), keys.reshape(1, -1))
    return (h % np.uint64(plan.w)).astype(np.int64)


def cms_column(plan: HashPlan, i: int, j: int) -> int:
    """Column of dataset index ``j`` in CMS row ``i``."""
    if not 0 <= i < plan.d:
        raise IndexError(i)
    h = mix(plan.cms_seeds[i], id_keys(np.array([j], dtype=np.uint64)))
    return int(h[0] % np.uint64(plan.w))


def collision_model(J: float | np.ndarray, K: int | float, r: int) -> float | np.ndarray:
    """Probability that two sets with Jaccard ``J`` share a bucket.

    K independent MinHashes collide jointly with probability J^K; otherwise
    the ideal rehash still collides with probability 1/r.
    """
    arr = np.asarray(J, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError("Jaccard similarity must lie in [0, 1]")
    pk = arr**K
    out = pk + (1.0 - pk) / r
    return float(out) if out.ndim == 0 else out
