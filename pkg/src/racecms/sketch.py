"""RACE-CMS sketch: a d x w count-min grid whose cells hold R ACE arrays.

Inserting dataset element ``j`` increments, for every row ``i`` and rep
``o``, counter ``A[i, h_i(j), o][L(x_j)]`` where ``h_i`` is the CMS column
hash and ``L`` the K-wise MinHash rehashed to ``r`` buckets. Each insert
touches exactly d*R counters; the raw vector is not needed afterwards.

Two storage layouts hold the same counters:

* Array: a dense ``(d, w, R, r)`` array of unsigned counters.
* Map: only non-zero counters, keyed by the packed 64-bit integer
  ``((i*w + col)*R + o)*r + bucket``.

Binary format (little-endian)::

    magic b"RACE" | version u16 | config block | n_inserted u64 | storage tag u8
    Array payload: d*w*R*r counters, C order over (i, col, o, bucket)
    Map payload:   for each (i, o): entry count u32
                   then, per (i, o) block: u32 keys (col*r + bucket), ascending,
                   followed by that block's counters
"""

from __future__ import annotations

import struct
from typing import Sequence

import numpy as np

from .core import (
    CONFIG_STRUCT_SIZE,
    Dataset,
    SketchConfig,
    SparseVector,
    StorageMode,
    validate_config,
)
from .errors import ConfigMismatch, CorruptSketch, DomainError, EmptyInput
from .errors import CounterOverflow
from .hashing import HashPlan, batch_buckets, cms_columns, derive_seeds, KIND_AUX, combine, minhash_many

MAGIC = b"RACE"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<4sH")
_SUFFIX = struct.Struct("<QB")
HEADER_SIZE = _PREFIX.size + CONFIG_STRUCT_SIZE + _SUFFIX.size

_DTYPES = {8: np.dtype("<u1"), 16: np.dtype("<u2"), 32: np.dtype("<u4")}
_STORAGE_TAG = {StorageMode.ARRAY: 0, StorageMode.MAP: 1}


class RaceCmsSketch:
    """Counters of one RACE-CMS sketch plus the hash plan that indexes them.

    Build with :func:`new_sketch`. A sketch is single-writer while it is
    being filled; shard the stream and :func:`merge` for parallel builds.
    """

    def __init__(self, cfg: SketchConfig, plan: HashPlan | None = None) -> None:
        validate_config(cfg)
        self.cfg = cfg
        self.plan = plan if plan is not None else HashPlan.from_config(cfg)
        self.n_inserted = 0
        self.storage = StorageMode(cfg.storage_mode)
        self.dtype = _DTYPES[cfg.counter_bits]
        self.cap = (1 << cfg.counter_bits) - 1
        self._dense: np.ndarray | None = None
        self._map: dict[int, int] | None = None
        self._map_arrays: tuple[np.ndarray, np.ndarray] | None = None
        if self.storage is StorageMode.ARRAY:
            self._dense = np.zeros((cfg.d, cfg.w, cfg.R, cfg.r), dtype=self.dtype)
        else:
            self._map = {}

    # -- indexing -------------------------------------------------------

    def pack(self, i, col, o, bucket) -> np.ndarray:
        """Flat counter index (also the map key) of (row, column, rep, bucket)."""
        c = self.cfg
        i, col, o, bucket = (np.asarray(a, dtype=np.int64) for a in (i, col, o, bucket))
        return ((i * c.w + col) * c.R + o) * c.r + bucket

    def unpack(self, keys: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        c = self.cfg
        keys = np.asarray(keys, dtype=np.int64)
        bucket = keys % c.r
        rest = keys // c.r
        o = rest % c.R
        rest //= c.R
        return rest // c.w, rest % c.w, o, bucket

    def _flat_increments(self, indptr: np.ndarray, ids: np.ndarray, j: np.ndarray) -> np.ndarray:
        cols = cms_columns(self.plan, j)  # (d, n)
        buckets = batch_buckets(self.plan, indptr, ids, cols)  # (d, R, n)
        d, R = self.cfg.d, self.cfg.R
        ii = np.arange(d).reshape(d, 1, 1)
        oo = np.arange(R).reshape(1, R, 1)
        return self.pack(ii, cols[:, None, :], oo, buckets).ravel()

    # -- mutation -------------------------------------------------------

    def insert(self, j: int, x: SparseVector) -> None:
        """Absorb stream element ``j`` with set ``x``."""
        if len(x) == 0:
            raise EmptyInput(f"element {j} is empty")
        indptr = np.array([0, len(x)], dtype=np.int64)
        self._apply(self._flat_increments(indptr, x.ids, np.array([j])), 1)

    def insert_many(self, indptr: np.ndarray, ids: np.ndarray, j: Sequence[int] | np.ndarray) -> None:
        """Absorb a CSR batch; ``j[k]`` is the stream index of row ``k``.

        All-or-nothing: on overflow no counter changes.
        """
        indptr = np.asarray(indptr, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        if j.size != indptr.size - 1:
            raise ValueError("one stream index per row required")
        if j.size == 0:
            return
        self._apply(self._flat_increments(indptr, ids, j), int(j.size))

    def insert_dataset(self, ds: Dataset, indices: Sequence[int] | np.ndarray | None = None) -> None:
        """Insert dataset rows (default: all non-empty rows) in one batch."""
        rows = ds.nonempty() if indices is None else np.asarray(indices, dtype=np.int64)
        indptr, ids = ds.subset(rows)
        self.insert_many(indptr, ids, rows)

    def _apply(self, flat: np.ndarray, n_new: int) -> None:
        keys, counts = np.unique(flat, return_counts=True)
        if self._dense is not None:
            view = self._dense.reshape(-1)
            current = view[keys].astype(np.int64)
            if np.any(current + counts > self.cap):
                raise CounterOverflow(f"a counter would exceed {self.cap}")
            view[keys] = (current + counts).astype(self.dtype)
        else:
            store = self._map
            klist = keys.tolist()
            clist = counts.tolist()
            for k, n in zip(klist, clist):
                if store.get(k, 0) + n > self.cap:
                    raise CounterOverflow(f"a counter would exceed {self.cap}")
            for k, n in zip(klist, clist):
                store[k] = store.get(k, 0) + n
            self._map_arrays = None
        self.n_inserted += n_new

    # -- reads ----------------------------------------------------------

    def nonzero(self) -> tuple[np.ndarray, np.ndarray]:
        """Sorted packed keys of non-zero counters and their values."""
        if self._dense is not None:
            flat = self._dense.reshape(-1)
            keys = np.flatnonzero(flat)
            return keys.astype(np.int64), flat[keys].astype(np.int64)
        if self._map_arrays is None:
            keys = np.fromiter(self._map.keys(), dtype=np.int64, count=len(self._map))
            vals = np.fromiter(self._map.values(), dtype=np.int64, count=len(self._map))
            order = np.argsort(keys, kind="stable")
            self._map_arrays = (keys[order], vals[order])
        return self._map_arrays

    def lookup(self, keys: np.ndarray) -> np.ndarray:
        """Counter values at packed ``keys`` (any shape)."""
        keys = np.asarray(keys, dtype=np.int64)
        if self._dense is not None:
            return self._dense.reshape(-1)[keys].astype(np.int64)
        nz_keys, nz_vals = self.nonzero()
        if nz_keys.size == 0:
            return np.zeros(keys.shape, dtype=np.int64)
        pos = np.searchsorted(nz_keys, keys)
        pos_c = np.minimum(pos, nz_keys.size - 1)
        hit = nz_keys[pos_c] == keys
        return np.where(hit, nz_vals[pos_c], 0)

    def counter(self, i: int, col: int, o: int, bucket: int) -> int:
        return int(self.lookup(self.pack(i, col, o, bucket)))

    def to_dense(self) -> np.ndarray:
        """All counters as a (d, w, R, r) int64 array (small sketches only)."""
        if self._dense is not None:
            return self._dense.astype(np.int64)
        c = self.cfg
        out = np.zeros(c.d * c.w * c.R * c.r, dtype=np.int64)
        keys, vals = self.nonzero()
        out[keys] = vals
        return out.reshape(c.d, c.w, c.R, c.r)

    def total(self) -> int:
        return int(self.nonzero()[1].sum())

    def nnz(self) -> int:
        return int(self.nonzero()[0].size)

    def same_counters(self, other: "RaceCmsSketch") -> bool:
        """Counter-for-counter equality, regardless of storage layout."""
        a_k, a_v = self.nonzero()
        b_k, b_v = other.nonzero()
        return np.array_equal(a_k, b_k) and np.array_equal(a_v, b_v)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RaceCmsSketch):
            return NotImplemented
        return self.cfg == other.cfg and self.n_inserted == other.n_inserted and self.same_counters(other)

    def __repr__(self) -> str:
        c = self.cfg
        return (
            f"RaceCmsSketch(K={c.K}, d={c.d}, w={c.w}, R={c.R}, r={c.r}, "
            f"{self.storage.value}, n_inserted={self.n_inserted}, nnz={self.nnz()})"
        )

    def memory_footprint(self) -> int:
        return memory_footprint(self)

    def serialize(self) -> bytes:
        return serialize(self)


def new_sketch(cfg: SketchConfig) -> RaceCmsSketch:
    """Empty sketch for ``cfg``; raises InvalidConfig for bad parameters."""
    return RaceCmsSketch(cfg)


def build_sketch(cfg: SketchConfig, ds: Dataset, indices: Sequence[int] | np.ndarray | None = None,
                 shards: int = 1) -> RaceCmsSketch:
    """Sketch of ``ds`` rows (default: all non-empty), optionally built in shards and merged."""
    rows = ds.nonempty() if indices is None else np.asarray(indices, dtype=np.int64)
    if shards <= 1 or rows.size < 2 * shards:
        sk = new_sketch(cfg)
        sk.insert_dataset(ds, rows)
        return sk
    from concurrent.futures import ThreadPoolExecutor

    parts = np.array_split(rows, shards)

    def _build(part: np.ndarray) -> RaceCmsSketch:
        sk = new_sketch(cfg)
        sk.insert_dataset(ds, part)
        return sk

    with ThreadPoolExecutor(max_workers=shards) as pool:
        built = list(pool.map(_build, parts))
    out = built[0]
    for sk in built[1:]:
        out = merge(out, sk)
    return out


def merge(a: RaceCmsSketch, b: RaceCmsSketch) -> RaceCmsSketch:
    """Elementwise sum of two sketches built from disjoint index sets."""
    if a.cfg != b.cfg:
        raise ConfigMismatch("sketches were built with different configurations")
    out = RaceCmsSketch(a.cfg, a.plan)
    if a._dense is not None:
        summed = a._dense.astype(np.int64) + b._dense.astype(np.int64)
        if summed.size and summed.max() > out.cap:
            raise CounterOverflow(f"merged counter exceeds {out.cap}")
        out._dense = summed.astype(out.dtype)
    else:
        merged = dict(a._map)
        for k, v in b._map.items():
            merged[k] = merged.get(k, 0) + v
            if merged[k] > out.cap:
                raise CounterOverflow(f"merged counter exceeds {out.cap}")
        out._map = merged
    out.n_inserted = a.n_inserted + b.n_inserted
    return out


def map_header_size(cfg: SketchConfig) -> int:
    """Bytes of an empty Map-mode sketch: fixed header plus (row, rep) directory."""
    return HEADER_SIZE + 4 * cfg.d * cfg.R


def memory_footprint(sk: RaceCmsSketch) -> int:
    """Serialized size in bytes, computed without serializing."""
    c = sk.cfg
    width = c.counter_bits // 8
    if sk.storage is StorageMode.ARRAY:
        return HEADER_SIZE + c.d * c.w * c.R * c.r * width
    return map_header_size(c) + sk.nnz() * (4 + width)


def serialize(sk: RaceCmsSketch) -> bytes:
    c = sk.cfg
    parts = [
        _PREFIX.pack(MAGIC, FORMAT_VERSION),
        c.to_bytes(),
        _SUFFIX.pack(sk.n_inserted, _STORAGE_TAG[sk.storage]),
    ]
    if sk.storage is StorageMode.ARRAY:
        parts.append(np.ascontiguousarray(sk._dense, dtype=sk.dtype).tobytes())
    else:
        keys, vals = sk.nonzero()
        i, col, o, bucket = sk.unpack(keys)
        block = i * c.R + o
        order = np.lexsort((col * c.r + bucket, block))
        block, local = block[order], (col * c.r + bucket)[order]
        vals = vals[order]
        counts = np.bincount(block, minlength=c.d * c.R).astype("<u4")
        parts.append(counts.tobytes())
        starts = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        for b in range(c.d * c.R):
            lo, hi = starts[b], starts[b + 1]
            parts.append(local[lo:hi].astype("<u4").tobytes())
            parts.append(vals[lo:hi].astype(sk.dtype).tobytes())
    return b"".join(parts)


def deserialize(data: bytes) -> RaceCmsSketch:
    """Inverse of :func:`serialize`; raises CorruptSketch on bad framing."""
    data = bytes(data)
    if len(data) < HEADER_SIZE:
        raise CorruptSketch("truncated header")
    magic, version = _PREFIX.unpack_from(data, 0)
    if magic != MAGIC:
        raise CorruptSketch(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CorruptSketch(f"unsupported format version {version}")
    try:
        cfg = SketchConfig.from_bytes(data[_PREFIX.size:_PREFIX.size + CONFIG_STRUCT_SIZE])
        validate_config(cfg)
    except ValueError as exc:
        raise CorruptSketch(f"bad config block: {exc}") from None
    n_inserted, tag = _SUFFIX.unpack_from(data, _PREFIX.size + CONFIG_STRUCT_SIZE)
    storage = StorageMode(cfg.storage_mode)
    if tag != _STORAGE_TAG[storage]:
        raise CorruptSketch("storage tag disagrees with config")
    sk = RaceCmsSketch(cfg)
    sk.n_inserted = n_inserted
    dtype = sk.dtype
    pos = HEADER_SIZE
    if storage is StorageMode.ARRAY:
        n = cfg.d * cfg.w * cfg.R * cfg.r
        if len(data) != pos + n * dtype.itemsize:
            raise CorruptSketch("array payload has wrong length")
        sk._dense = np.frombuffer(data, dtype=dtype, count=n, offset=pos).reshape(
            cfg.d, cfg.w, cfg.R, cfg.r).astype(dtype, copy=True)
        return sk
    nblocks = cfg.d * cfg.R
    if len(data) < pos + 4 * nblocks:
        raise CorruptSketch("truncated map directory")
    counts = np.frombuffer(data, dtype="<u4", count=nblocks, offset=pos).astype(np.int64)
    pos += 4 * nblocks
    if len(data) != pos + int(counts.sum()) * (4 + dtype.itemsize):
        raise CorruptSketch("map payload has wrong length")
    store: dict[int, int] = {}
    for b in range(nblocks):
        n = int(counts[b])
        local = np.frombuffer(data, dtype="<u4", count=n, offset=pos).astype(np.int64)
        pos += 4 * n
        vals = np.frombuffer(data, dtype=dtype, count=n, offset=pos).astype(np.int64)
        pos += n * dtype.itemsize
        if n and (np.any(np.diff(local) <= 0) or local[-1] >= cfg.w * cfg.r or np.any(vals == 0)):
            raise CorruptSketch("map block keys out of order or out of range")
        i, o = divmod(b, cfg.R)
        keys = sk.pack(i, local // cfg.r, o, local % cfg.r)
        store.update(zip(keys.tolist(), vals.tolist()))
    sk._map = store
    return sk


class WeightedAce:
    """Single ACE array incremented by signed coefficients.

    Test instrument for linear combinations of collision probabilities:
    ``array[L(q)]`` estimates ``sum_i coeff_i * p(x_i, q)^K``.
    """

    def __init__(self, seed: int, K: int, r: int) -> None:
        if K < 1 or r < 2:
            raise DomainError("need K >= 1 and r >= 2")
        seeds = derive_seeds(seed, KIND_AUX, (K + 1,))
        self.minhash_seeds = seeds[:K]
        self.rehash_seed = seeds[K]
        self.K = K
        self.r = r
        self.array = np.zeros(r, dtype=np.float64)

    def bucket(self, x: SparseVector) -> int:
        mh = minhash_many(self.minhash_seeds, x)
        return int(combine(self.rehash_seed, mh, self.r))

    def estimate(self, q: SparseVector) -> float:
        return float(self.array[self.bucket(q)])


def ace_weighted_insert(ace: WeightedAce, coeff: float, x: SparseVector) -> None:
    if not -1.0 <= coeff <= 1.0:
        raise DomainError(f"coefficient {coeff} outside [-1, 1]")
    if len(x) == 0:
        raise EmptyInput("cannot insert an empty set")
    ace.array[ace.bucket(x)] += coeff
