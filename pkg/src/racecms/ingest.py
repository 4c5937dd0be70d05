"""SNAP-style edge lists to per-node adjacency sets, plus dataset statistics.

Node IDs are remapped densely in order of first appearance; the original
IDs become the dataset labels. Dataset cache format (little-endian)::

    magic b"RDSC" | version u16 | N u64 | nnz u64 | has_labels u8
    indptr: (N+1) x u64 | ids: nnz x u32 | labels: N x u64 (if present)
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy import sparse

from .core import UINT32_MAX, Dataset
from .errors import CorruptSketch, ParseError

CACHE_MAGIC = b"RDSC"
_CACHE_HEADER = struct.Struct("<4sHQQB")


def _parse_line(line: str, lineno: int) -> tuple[int, int] | None:
    text = line.strip()
    if not text or text.startswith("#"):
        return None
    parts = text.split()
    if len(parts) != 2:
        raise ParseError(lineno, f"expected '<src> <dst>', got {text!r}")
    try:
        src, dst = int(parts[0]), int(parts[1])
    except ValueError:
        raise ParseError(lineno, f"non-integer node id in {text!r}") from None
    if src < 0 or dst < 0:
        raise ParseError(lineno, "negative node id")
    if src > UINT32_MAX or dst > UINT32_MAX:
        raise OverflowError(f"line {lineno}: node id exceeds 2^32 - 1")
    return src, dst


def parse_edge_list(lines: Iterable[str], directed: bool = True, mode: str = "accumulate") -> Dataset:
    """One adjacency set per node from ``<src> <dst>`` lines.

    ``mode="accumulate"`` buffers each source's edges in a dict during the
    pass; ``mode="two_phase"`` collects raw edge arrays first and groups by
    source afterwards. Both give identical datasets.
    """
    if mode not in ("accumulate", "two_phase"):
        raise ValueError(f"unknown mode {mode!r}")
    dense: dict[int, int] = {}
    order: list[int] = []

    def node(label: int) -> int:
        j = dense.get(label)
        if j is None:
            j = dense[label] = len(order)
            order.append(label)
        return j

    if mode == "accumulate":
        adj: dict[int, set[int]] = {}
        for lineno, line in enumerate(lines, start=1):
            edge = _parse_line(line, lineno)
            if edge is None:
                continue
            s, t = node(edge[0]), node(edge[1])
            adj.setdefault(s, set()).add(t)
            if not directed:
                adj.setdefault(t, set()).add(s)
        rows = [sorted(adj.get(j, ())) for j in range(len(order))]
        sizes = np.fromiter((len(r) for r in rows), dtype=np.int64, count=len(rows))
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum(sizes, out=indptr[1:])
        ids = np.fromiter((t for r in rows for t in r), dtype=np.uint32, count=int(indptr[-1]))
        return Dataset(indptr, ids, np.asarray(order, dtype=np.uint64))

    src: list[int] = []
    dst: list[int] = []
    for lineno, line in enumerate(lines, start=1):
        edge = _parse_line(line, lineno)
        if edge is None:
            continue
        src.append(node(edge[0]))
        dst.append(node(edge[1]))
    s = np.asarray(src, dtype=np.int64)
    t = np.asarray(dst, dtype=np.int64)
    if not directed:
        s, t = np.concatenate([s, t]), np.concatenate([t, s])
    n = len(order)
    pairs = np.unique(s * max(n, 1) + t) if s.size else np.empty(0, dtype=np.int64)
    s, t = pairs // max(n, 1), pairs % max(n, 1)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(s, minlength=n), out=indptr[1:])
    return Dataset(indptr, t.astype(np.uint32), np.asarray(order, dtype=np.uint64))


def read_edge_list(path: str | Path, directed: bool = True, mode: str = "accumulate") -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_edge_list(fh, directed=directed, mode=mode)


@dataclass(frozen=True)
class DatasetStats:
    nodes: int
    nonzeros: int
    mean_edges: float
    mean_similarity: float
    similarity_defined: bool
    sampled_pairs: int


def dataset_stats(ds: Dataset, sample_pairs: int = 100_000, seed: int = 0) -> DatasetStats:
    """Node and edge counts plus mean pairwise Jaccard over sampled pairs.

    Pairs of two empty sets count as similarity 0. With fewer than two
    vectors the similarity is reported as 0 with ``similarity_defined=False``.
    """
    n = len(ds)
    nnz = ds.nonzeros
    mean_edges = nnz / n if n else 0.0
    if n < 2 or sample_pairs < 1:
        return DatasetStats(n, nnz, mean_edges, 0.0, False, 0)
    rng = np.random.default_rng(seed)
    a = rng.integers(0, n, size=sample_pairs)
    b = rng.integers(0, n - 1, size=sample_pairs)
    b = b + (b >= a)  # distinct partner, uniform over the other n-1
    X = incidence_matrix(ds)
    sizes = ds.sizes()
    total = 0.0
    for lo in range(0, sample_pairs, 50_000):
        aa, bb = a[lo:lo + 50_000], b[lo:lo + 50_000]
        inter = np.asarray(X[aa].multiply(X[bb]).sum(axis=1)).ravel()
        union = sizes[aa] + sizes[bb] - inter
        total += float(np.sum(np.where(union > 0, inter / np.maximum(union, 1), 0.0)))
    return DatasetStats(n, nnz, mean_edges, total / sample_pairs, True, sample_pairs)


def incidence_matrix(ds: Dataset) -> sparse.csr_matrix:
    """0/1 CSR matrix with one row per vector and one column per element ID."""
    n_cols = int(ds.indices.max()) + 1 if ds.nonzeros else 1
    data = np.ones(ds.nonzeros, dtype=np.float64)
    return sparse.csr_matrix((data, ds.indices.astype(np.int64), ds.indptr), shape=(len(ds), n_cols))


def _width(max_value: int, choices: tuple[int, ...]) -> int:
    for w in choices:
        if max_value < 1 << (8 * w):
            return w
    raise OverflowError("value too large")


def raw_size_bytes(ds: Dataset) -> int:
    """CSR size with the narrowest unsigned types: IDs in 1/2/4 bytes, offsets in 1/2/4/8."""
    max_id = int(ds.indices.max()) if ds.nonzeros else 0
    id_width = _width(max_id, (1, 2, 4))
    off_width = _width(ds.nonzeros, (1, 2, 4, 8))
    return ds.nonzeros * id_width + (len(ds) + 1) * off_width


def save_dataset(ds: Dataset, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(dataset_to_bytes(ds))


def dataset_to_bytes(ds: Dataset) -> bytes:
    buf = io.BytesIO()
    buf.write(_CACHE_HEADER.pack(CACHE_MAGIC, 1, len(ds), ds.nonzeros, ds.labels is not None))
    buf.write(ds.indptr.astype("<u8").tobytes())
    buf.write(ds.indices.astype("<u4").tobytes())
    if ds.labels is not None:
        buf.write(ds.labels.astype("<u8").tobytes())
    return buf.getvalue()


def dataset_from_bytes(data: bytes) -> Dataset:
    if len(data) < _CACHE_HEADER.size:
        raise CorruptSketch("truncated dataset header")
    magic, version, n, nnz, has_labels = _CACHE_HEADER.unpack_from(data)
    if magic != CACHE_MAGIC or version != 1:
        raise CorruptSketch("not a dataset cache")
    expect = _CACHE_HEADER.size + 8 * (n + 1) + 4 * nnz + (8 * n if has_labels else 0)
    if len(data) != expect:
        raise CorruptSketch("dataset cache has wrong length")
    pos = _CACHE_HEADER.size
    indptr = np.frombuffer(data, dtype="<u8", count=n + 1, offset=pos).astype(np.int64)
    pos += 8 * (n + 1)
    ids = np.frombuffer(data, dtype="<u4", count=nnz, offset=pos).astype(np.uint32)
    pos += 4 * nnz
    labels = np.frombuffer(data, dtype="<u8", count=n, offset=pos).astype(np.uint64) if has_labels else None
    try:
        return Dataset(indptr, ids, labels)
    except ValueError as exc:
        raise CorruptSketch(f"inconsistent dataset cache: {exc}") from None


def load_dataset(path: str | Path) -> Dataset:
    return dataset_from_bytes(Path(path).read_bytes())
