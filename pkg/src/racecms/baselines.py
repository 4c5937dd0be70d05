"""Streaming baselines: sparse random projection and random sampling.

Projection never materializes the (huge) projection matrix. The entry for
output ``k`` and element ``id`` is derived by hashing (seed, k, id), giving
+sqrt(3) / 0 / -sqrt(3) with probabilities 1/6, 2/3, 1/6. Outputs are
scaled by 1/sqrt(m) so inner products are preserved in expectation.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Dataset, QueryResult, SparseVector
from .errors import ConfigMismatch, CorruptSketch, DomainError
from .hashing import KIND_PROJECTION, derive_seeds, id_keys, mix
from .oracle import jaccard_all
from .recovery import top_v

_SQRT3 = math.sqrt(3.0)
_PROJ_HEADER = struct.Struct("<4sHIQQ")  # magic, version, m, seed, N
_SAMPLE_HEADER = struct.Struct("<4sHdQQ")  # magic, version, fraction, seed, count
PROJ_MAGIC = b"RPRJ"
SAMPLE_MAGIC = b"RSMP"


def _signs(seed: int, m: int, ids: np.ndarray) -> np.ndarray:
    """(m, len(ids)) matrix of projection entries in {-sqrt3, 0, +sqrt3}."""
    row_seeds = derive_seeds(seed, KIND_PROJECTION, (m,))
    u = mix(row_seeds.reshape(-1, 1), id_keys(ids).reshape(1, -1)) % np.uint64(6)
    out = np.zeros(u.shape)
    out[u == 0] = _SQRT3
    out[u == 1] = -_SQRT3
    return out


def project(x: SparseVector, m: int, seed: int) -> np.ndarray:
    """Project the 0/1 indicator vector of ``x`` down to ``m`` dimensions."""
    if m < 1:
        raise DomainError("m must be >= 1")
    if len(x) == 0:
        return np.zeros(m)
    return _signs(seed, m, x.ids).sum(axis=1) / math.sqrt(m)


@dataclass
class ProjectedDataset:
    m: int
    seed: int
    vectors: np.ndarray  # (N, m) float32

    @property
    def nbytes(self) -> int:
        return _PROJ_HEADER.size + self.vectors.shape[0] * self.m * 4

    def serialize(self) -> bytes:
        head = _PROJ_HEADER.pack(PROJ_MAGIC, 1, self.m, self.seed, self.vectors.shape[0])
        return head + np.ascontiguousarray(self.vectors, dtype="<f4").tobytes()

    @classmethod
    def deserialize(cls, data: bytes) -> "ProjectedDataset":
        if len(data) < _PROJ_HEADER.size:
            raise CorruptSketch("truncated projection header")
        magic, version, m, seed, n = _PROJ_HEADER.unpack_from(data)
        if magic != PROJ_MAGIC or version != 1:
            raise CorruptSketch("not a projection artifact")
        if len(data) != _PROJ_HEADER.size + n * m * 4:
            raise CorruptSketch("projection payload has wrong length")
        vecs = np.frombuffer(data, dtype="<f4", offset=_PROJ_HEADER.size).reshape(n, m).astype(np.float32)
        return cls(m, seed, vecs)


def project_dataset(ds: Dataset, m: int, seed: int, chunk: int = 1 << 20) -> ProjectedDataset:
    """Project every row, streaming over rows in chunks of ~``chunk`` hash evaluations."""
    if m < 1:
        raise DomainError("m must be >= 1")
    out = np.zeros((len(ds), m), dtype=np.float32)
    budget = max(1, chunk // m)
    scale = 1.0 / math.sqrt(m)
    indptr = ds.indptr
    a = 0
    while a < len(ds):
        # extend the row block until it holds ~budget IDs
        b = int(np.searchsorted(indptr, indptr[a] + budget, side="right")) - 1
        b = min(len(ds), max(b, a + 1))
        lo, hi = indptr[a], indptr[b]
        if hi > lo:
            sig = _signs(seed, m, ds.indices[lo:hi])  # (m, nnz)
            sizes = np.diff(indptr[a:b + 1])
            full = np.flatnonzero(sizes > 0)
            sums = np.add.reduceat(sig, (indptr[a:b][full] - lo), axis=1)
            out[a + full] = (sums.T * scale).astype(np.float32)
        a = b
    return ProjectedDataset(m, seed, out)


def query_projected(pd: ProjectedDataset, qvec: np.ndarray, v: int,
                    candidates: Sequence[int] | np.ndarray | None = None) -> QueryResult:
    """Exact Euclidean scan; score is the negative distance."""
    qvec = np.asarray(qvec, dtype=np.float64)
    if qvec.shape != (pd.m,):
        raise ConfigMismatch(f"query has dimension {qvec.shape}, dataset has {pd.m}")
    rows = np.arange(pd.vectors.shape[0]) if candidates is None else np.asarray(candidates, dtype=np.int64)
    diff = pd.vectors[rows].astype(np.float64) - qvec
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    return top_v(-dist, min(v, rows.size), rows)


@dataclass
class SampledDataset:
    fraction: float
    seed: int
    kept: np.ndarray  # original indices, ascending
    indptr: np.ndarray
    indices: np.ndarray

    @property
    def nbytes(self) -> int:
        # per kept vector: u32 original index + u32 length, then u32 IDs
        return _SAMPLE_HEADER.size + 8 * self.kept.size + 4 * self.indices.size

    def as_dataset(self) -> Dataset:
        return Dataset(self.indptr, self.indices)

    def serialize(self) -> bytes:
        head = _SAMPLE_HEADER.pack(SAMPLE_MAGIC, 1, self.fraction, self.seed, self.kept.size)
        parts = [head]
        for k in range(self.kept.size):
            row = self.indices[self.indptr[k]:self.indptr[k + 1]]
            parts.append(struct.pack("<II", int(self.kept[k]), row.size))
            parts.append(row.astype("<u4").tobytes())
        return b"".join(parts)

    @classmethod
    def deserialize(cls, data: bytes) -> "SampledDataset":
        if len(data) < _SAMPLE_HEADER.size:
            raise CorruptSketch("truncated sample header")
        magic, version, fraction, seed, count = _SAMPLE_HEADER.unpack_from(data)
        if magic != SAMPLE_MAGIC or version != 1:
            raise CorruptSketch("not a sample artifact")
        pos = _SAMPLE_HEADER.size
        kept, rows = [], []
        for _ in range(count):
            if pos + 8 > len(data):
                raise CorruptSketch("truncated sample entry")
            idx, n = struct.unpack_from("<II", data, pos)
            pos += 8
            if pos + 4 * n > len(data):
                raise CorruptSketch("truncated sample entry")
            rows.append(np.frombuffer(data, dtype="<u4", count=n, offset=pos).astype(np.uint32))
            pos += 4 * n
            kept.append(idx)
        if pos != len(data):
            raise CorruptSketch("trailing bytes after sample payload")
        indptr = np.zeros(count + 1, dtype=np.int64)
        np.cumsum([r.size for r in rows], out=indptr[1:])
        ids = np.concatenate(rows) if rows else np.empty(0, dtype=np.uint32)
        return cls(fraction, seed, np.asarray(kept, dtype=np.int64), indptr, ids)


def sample(ds: Dataset, fraction: float, seed: int,
           candidates: Sequence[int] | np.ndarray | None = None) -> SampledDataset:
    """Keep ceil(fraction * n) of the candidate rows uniformly without replacement."""
    if not 0.0 < fraction <= 1.0:
        raise DomainError("fraction must lie in (0, 1]")
    rows = np.arange(len(ds)) if candidates is None else np.asarray(candidates, dtype=np.int64)
    n_keep = min(rows.size, math.ceil(fraction * rows.size - 1e-9))
    rng = np.random.default_rng(seed)
    kept = np.sort(rng.choice(rows, size=n_keep, replace=False)) if n_keep < rows.size else np.sort(rows)
    indptr, ids = ds.subset(kept)
    return SampledDataset(fraction, seed, kept, indptr, ids)


def query_sampled(sd: SampledDataset, q: SparseVector, v: int) -> QueryResult:
    """Exact Jaccard top-v over the kept rows, reported by original index."""
    if sd.kept.size == 0:
        return QueryResult((), ())
    J = jaccard_all(sd.as_dataset(), q)
    return top_v(J, min(v, sd.kept.size), sd.kept)
