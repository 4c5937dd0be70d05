"""Domain types and configuration validation.

A data point is a set of 32-bit element IDs (for graphs: a node's
out-neighbors). A :class:`Dataset` stores N such sets in CSR form; index
``j`` (0-based position in the dataset) is the identity that the sketch
hashes, external labels are only a lookup layer on top.
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import InvalidConfig

UINT32_MAX = 2**32 - 1
UINT64_MAX = 2**64 - 1


class StorageMode(str, enum.Enum):
    ARRAY = "array"
    MAP = "map"


class LshSharing(str, enum.Enum):
    # one LSH per (row, rep), shared by all columns of that row
    PER_ROW_REP = "per_row_rep"
    # one LSH per (row, rep, column), as in the literal initialization
    PER_CELL = "per_cell"


@dataclass(frozen=True, eq=False)
class SparseVector:
    """Sorted, duplicate-free set of uint32 element IDs."""

    ids: np.ndarray

    def __post_init__(self) -> None:
        ids = np.asarray(self.ids, dtype=np.uint32)
        if ids.ndim != 1:
            raise ValueError("SparseVector ids must be one-dimensional")
        if ids.size > 1 and not np.all(ids[1:] > ids[:-1]):
            raise ValueError("SparseVector ids must be strictly increasing")
        ids.setflags(write=False)
        object.__setattr__(self, "ids", ids)

    def __len__(self) -> int:
        return int(self.ids.size)

    def __iter__(self) -> Iterator[int]:
        return iter(self.ids.tolist())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return np.array_equal(self.ids, other.ids)

    def __hash__(self) -> int:
        return hash(self.ids.tobytes())

    def __repr__(self) -> str:
        return f"SparseVector({self.ids.tolist()})"


def make_sparse_vector(ids: Iterable[int]) -> SparseVector:
    """Sort and deduplicate ``ids``; repeated IDs collapse silently."""
    arr = ids if isinstance(ids, np.ndarray) else np.asarray(list(ids))
    if arr.size == 0:
        return SparseVector(np.empty(0, dtype=np.uint32))
    if arr.dtype.kind not in "iu":
        raise TypeError("element IDs must be integers")
    if int(arr.min()) < 0 or int(arr.max()) > UINT32_MAX:
        raise OverflowError("element IDs must fit in 32 unsigned bits")
    return SparseVector(np.unique(arr).astype(np.uint32))


class Dataset:
    """N sparse vectors in CSR layout with optional unique external labels."""

    def __init__(self, indptr: np.ndarray, indices: np.ndarray, labels: np.ndarray | None = None) -> None:
        indptr = np.asarray(indptr, dtype=np.int64)
        indices = np.asarray(indices, dtype=np.uint32)
        if indptr.ndim != 1 or indptr.size == 0 or indptr[0] != 0 or indptr[-1] != indices.size:
            raise ValueError("malformed CSR indptr")
        if np.any(np.diff(indptr) < 0):
            raise ValueError("CSR indptr must be non-decreasing")
        if indices.size > 1:
            # strictly increasing within each row
            step_ok = indices[1:].astype(np.int64) > indices[:-1].astype(np.int64)
            row_start = np.zeros(indices.size, dtype=bool)
            starts = indptr[:-1][np.diff(indptr) > 0]
            row_start[starts] = True
            if not np.all(step_ok | row_start[1:]):
                raise ValueError("row ids must be strictly increasing")
        n = indptr.size - 1
        if labels is not None:
            labels = np.asarray(labels, dtype=np.uint64)
            if labels.shape != (n,):
                raise ValueError("labels must have one entry per vector")
            if np.unique(labels).size != n:
                raise ValueError("labels must be unique")
            labels.setflags(write=False)
        indptr.setflags(write=False)
        indices.setflags(write=False)
        self.indptr = indptr
        self.indices = indices
        self.labels = labels

    @classmethod
    def from_vectors(cls, vectors: Sequence[SparseVector | Iterable[int]], labels: Sequence[int] | None = None) -> "Dataset":
        vecs = [v if isinstance(v, SparseVector) else make_sparse_vector(v) for v in vectors]
        sizes = np.fromiter((len(v) for v in vecs), dtype=np.int64, count=len(vecs))
        indptr = np.zeros(len(vecs) + 1, dtype=np.int64)
        np.cumsum(sizes, out=indptr[1:])
        indices = np.concatenate([v.ids for v in vecs]) if vecs else np.empty(0, dtype=np.uint32)
        return cls(indptr, indices, None if labels is None else np.asarray(labels))

    def __len__(self) -> int:
        return self.indptr.size - 1

    @property
    def N(self) -> int:
        return len(self)

    @property
    def nonzeros(self) -> int:
        return int(self.indices.size)

    def sizes(self) -> np.ndarray:
        return np.diff(self.indptr)

    def __getitem__(self, j: int) -> SparseVector:
        if j < 0:
            j += len(self)
        if not 0 <= j < len(self):
            raise IndexError(j)
        return SparseVector(self.indices[self.indptr[j]:self.indptr[j + 1]])

    def __iter__(self) -> Iterator[SparseVector]:
        for j in range(len(self)):
            yield self[j]

    def nonempty(self) -> np.ndarray:
        """Indices of vectors with at least one element."""
        return np.flatnonzero(self.sizes() > 0)

    def subset(self, rows: Sequence[int] | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """CSR (indptr, indices) restricted to ``rows``, in the given order."""
        rows = np.asarray(rows, dtype=np.int64)
        sizes = self.sizes()[rows]
        indptr = np.zeros(rows.size + 1, dtype=np.int64)
        np.cumsum(sizes, out=indptr[1:])
        if rows.size == 0:
            return indptr, np.empty(0, dtype=np.uint32)
        starts = self.indptr[rows]
        # gather positions row by row without a python loop
        offsets = np.arange(indptr[-1]) - np.repeat(indptr[:-1], sizes)
        pos = np.repeat(starts, sizes) + offsets
        return indptr, self.indices[pos]

    def index_of(self, label: int) -> int:
        if self.labels is None:
            if not 0 <= label < len(self):
                raise KeyError(label)
            return int(label)
        hits = np.flatnonzero(self.labels == np.uint64(label))
        if hits.size == 0:
            raise KeyError(label)
        return int(hits[0])

    def label_of(self, j: int) -> int:
        return int(j) if self.labels is None else int(self.labels[j])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        if (self.labels is None) != (other.labels is None):
            return False
        return (
            np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and (self.labels is None or np.array_equal(self.labels, other.labels))
        )

    def __repr__(self) -> str:
        return f"Dataset(N={len(self)}, nonzeros={self.nonzeros})"


@dataclass(frozen=True)
class SketchConfig:
    """Hyperparameters that fully determine a sketch family."""

    K: int
    d: int
    w: int
    R: int
    r: int
    counter_bits: int = 16
    master_seed: int = 0
    storage_mode: StorageMode = StorageMode.ARRAY
    lsh_sharing: LshSharing = LshSharing.PER_ROW_REP

    _STRUCT = struct.Struct("<IIIIIBBBQ")

    def to_bytes(self) -> bytes:
        return self._STRUCT.pack(
            self.K, self.d, self.w, self.R, self.r, self.counter_bits,
            _STORAGE_CODES[StorageMode(self.storage_mode)],
            _SHARING_CODES[LshSharing(self.lsh_sharing)],
            self.master_seed,
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "SketchConfig":
        K, d, w, R, r, bits, storage, sharing, seed = cls._STRUCT.unpack(data[: cls._STRUCT.size])
        try:
            storage_mode = _STORAGE_FROM_CODE[storage]
            lsh_sharing = _SHARING_FROM_CODE[sharing]
        except KeyError as exc:
            raise ValueError(f"unknown enum code {exc.args[0]}") from None
        return cls(K, d, w, R, r, bits, seed, storage_mode, lsh_sharing)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["storage_mode"] = StorageMode(self.storage_mode).value
        out["lsh_sharing"] = LshSharing(self.lsh_sharing).value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SketchConfig":
        kw = {f.name: data[f.name] for f in fields(cls) if f.name in data}
        if "storage_mode" in kw:
            kw["storage_mode"] = StorageMode(kw["storage_mode"])
        if "lsh_sharing" in kw:
            kw["lsh_sharing"] = LshSharing(kw["lsh_sharing"])
        return cls(**kw)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SketchConfig":
        return cls.from_dict(json.loads(text))


_STORAGE_CODES = {StorageMode.ARRAY: 0, StorageMode.MAP: 1}
_STORAGE_FROM_CODE = {v: k for k, v in _STORAGE_CODES.items()}
_SHARING_CODES = {LshSharing.PER_ROW_REP: 0, LshSharing.PER_CELL: 1}
_SHARING_FROM_CODE = {v: k for k, v in _SHARING_CODES.items()}

CONFIG_STRUCT_SIZE = SketchConfig._STRUCT.size


def _is_int(x: object) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def validate_config(cfg: SketchConfig) -> None:
    """Raise :class:`InvalidConfig` naming the first offending field."""
    for name in ("K", "d", "w", "R"):
        value = getattr(cfg, name)
        if not _is_int(value) or value < 1 or value > UINT32_MAX:
            raise InvalidConfig(name, f"must be an integer in [1, 2^32), got {value!r}")
    if not _is_int(cfg.r) or cfg.r < 2 or cfg.r > UINT32_MAX:
        raise InvalidConfig("r", f"rehash range must be an integer >= 2, got {cfg.r!r}")
    if cfg.counter_bits not in (8, 16, 32):
        raise InvalidConfig("counter_bits", f"must be 8, 16 or 32, got {cfg.counter_bits!r}")
    if not _is_int(cfg.master_seed) or not 0 <= cfg.master_seed <= UINT64_MAX:
        raise InvalidConfig("master_seed", "must be a 64-bit unsigned integer")
    try:
        mode = StorageMode(cfg.storage_mode)
    except ValueError:
        raise InvalidConfig("storage_mode", repr(cfg.storage_mode)) from None
    try:
        LshSharing(cfg.lsh_sharing)
    except ValueError:
        raise InvalidConfig("lsh_sharing", repr(cfg.lsh_sharing)) from None
    if mode is StorageMode.MAP and cfg.w * cfg.r > 2**32:
        # map entries store (column, bucket) packed into 32 bits
        raise InvalidConfig("r", "map storage requires w * r <= 2^32")
    if cfg.d * cfg.w * cfg.R * cfg.r >= 2**63:
        raise InvalidConfig("r", "d * w * R * r must stay below 2^63")


@dataclass(frozen=True)
class QueryResult:
    """Ranked neighbor indices, best first, with their scores."""

    neighbors: tuple[int, ...]
    scores: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.neighbors)
