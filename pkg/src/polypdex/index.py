"""Exact Hamming-space ball tree over packed hash codes.

The tree recursively splits record sets between two pole records (the
farthest-apart pair within a seeded sample), so each node owns a contiguous
range of a permutation array and a covering ball (center record, max
distance). Queries run best-first with the triangle-inequality lower bound
max(0, d(q, center) - radius); pruning is strict, so results are exactly the
k nearest by (distance, id), byte-for-byte equal to a linear scan.

Nothing here is approximate: quantization is the only lossy step in the
pipeline, search in code space is exact.
"""

from __future__ import annotations

import heapq
import struct
import sys
from dataclasses import dataclass

import numpy as np

from .errors import (
    CorruptFileError,
    DimMismatchError,
    EmptyDatabaseError,
    KTooLargeError,
    VersionMismatchError,
)
from .hashing import code_nbytes, code_to_int, hamming_many
from .records import Neighbor, RecordStore

ENDX_MAGIC = b"ENDX1\0"

_LEAF = 1
_INTERNAL = 0


@dataclass(frozen=True)
class QueryBudget:
    k: int
    max_distance: int | None = None


class BallTreeIndex:
    """Immutable after build; concurrent queries need no locking."""

    def __init__(self, store: RecordStore, leaf_capacity: int, nodes: np.ndarray, perm: np.ndarray):
        self.store = store
        self.leaf_capacity = leaf_capacity
        # nodes: (M, 5) int64 rows [kind, center_record, radius, a, b];
        # internal nodes carry child node ids in (a, b), leaves carry their
        # [a, b) range in perm.
        self.nodes = nodes
        self.perm = perm
        self._perm_ints = [store.code_ints[i] for i in perm]
        self._center_ints = [store.code_ints[i] for i in nodes[:, 1]]

    @property
    def nbits(self) -> int:
        return self.store.nbits

    def __len__(self) -> int:
        return len(self.store)

    def query(self, code: np.ndarray, budget: QueryBudget) -> list[Neighbor]:
        """Exact k-nearest records by (Hamming distance, id)."""
        code = np.asarray(code, dtype=np.uint8)
        if code.size != self.store.codes.shape[1]:
            raise DimMismatchError(
                f"query code has {code.size} bytes, index holds {self.store.codes.shape[1]}"
            )
        n = len(self.store)
        if not 1 <= budget.k <= n:
            raise KTooLargeError(f"k={budget.k} outside [1, {n}]")

        q = code_to_int(code)
        rank = self.store.tie_rank
        perm = self.perm
        perm_ints = self._perm_ints
        nodes = self.nodes
        center_ints = self._center_ints
        limit = budget.max_distance

        # Max-heap of the current k best as (-dist, -rank, record); its root
        # is the candidate to beat. Pruning is strict (>), so subtrees that
        # could still contribute an equal-distance, smaller-id record are
        # always explored.
        best: list[tuple[int, int, int]] = []

        def bound_of(node_id: int) -> int:
            d = (q ^ center_ints[node_id]).bit_count()
            return max(0, d - int(nodes[node_id, 2]))

        frontier: list[tuple[int, int]] = [(bound_of(0), 0)]
        while frontier:
            bound, node_id = heapq.heappop(frontier)
            if len(best) == budget.k and bound > -best[0][0]:
                break
            if limit is not None and bound > limit:
                break
            kind, _, _, a, b = (int(v) for v in nodes[node_id])
            if kind == _LEAF:
                for pos in range(a, b):
                    d = (q ^ perm_ints[pos]).bit_count()
                    if limit is not None and d > limit:
                        continue
                    rec = int(perm[pos])
                    entry = (-d, -int(rank[rec]), rec)
                    if len(best) < budget.k:
                        heapq.heappush(best, entry)
                    elif entry > best[0]:
                        heapq.heapreplace(best, entry)
            else:
                for child in (a, b):
                    cb = bound_of(child)
                    if len(best) == budget.k and cb > -best[0][0]:
                        continue
                    if limit is not None and cb > limit:
                        continue
                    heapq.heappush(frontier, (cb, child))

        ordered = sorted(best, reverse=True)
        ids, labels = self.store.ids, self.store.labels
        return [
            Neighbor(id=ids[rec], label=int(labels[rec]), distance=float(-nd))
            for nd, _, rec in ordered
        ]

    def audit(self) -> None:
        """Structural checks: every record in exactly one leaf, inside its ball."""
        seen = np.zeros(len(self.store), dtype=bool)
        for node_id in range(self.nodes.shape[0]):
            kind, center, radius, a, b = (int(v) for v in self.nodes[node_id])
            if kind == _LEAF:
                members = self.perm[a:b]
                if seen[members].any():
                    raise AssertionError("record assigned to multiple leaves")
                seen[members] = True
            else:
                start, stop = self._range_of(node_id)
                members = self.perm[start:stop]
            dists = hamming_many(self.store.codes[members], self.store.codes[center])
            if dists.max(initial=0) > radius:
                raise AssertionError(f"node {node_id} radius {radius} violated")
        if not seen.all():
            raise AssertionError("tree does not cover all records")

    def _range_of(self, node_id: int) -> tuple[int, int]:
        kind, _, _, a, b = (int(v) for v in self.nodes[node_id])
        if kind == _LEAF:
            return a, b
        start, _ = self._range_of(a)
        _, stop = self._range_of(b)
        return start, stop


def build(store: RecordStore, leaf_capacity: int = 32, pole_sample: int = 64,
          seed: int = 0) -> BallTreeIndex:
    """Construct the tree; deterministic given record order and seed."""
    if leaf_capacity < 1:
        raise ValueError("leaf_capacity must be >= 1")
    n = len(store)
    codes = store.codes
    perm = np.arange(n, dtype=np.int64)
    rng = np.random.default_rng(seed)
    rows: list[list[int]] = []

    def radius_of(center: int, members: np.ndarray) -> int:
        return int(hamming_many(codes[members], codes[center]).max())

    def build_range(start: int, end: int) -> int:
        node_id = len(rows)
        rows.append([0, 0, 0, 0, 0])
        members = perm[start:end]
        center = int(members[0])
        radius = radius_of(center, members)
        count = end - start

        split = None
        if count > leaf_capacity:
            sample_size = min(pole_sample, count)
            sample_pos = rng.choice(count, size=sample_size, replace=False)
            sample = members[np.sort(sample_pos)]
            sub = codes[sample]
            wide = np.bitwise_count(sub[:, None, :] ^ sub[None, :, :]).sum(axis=2)
            flat = int(np.argmax(wide))
            p1, p2 = sample[flat // sample_size], sample[flat % sample_size]
            if wide.flat[flat] > 0:
                d1 = hamming_many(codes[members], codes[p1])
                d2 = hamming_many(codes[members], codes[p2])
                left_mask = d1 <= d2
                left_mask[members == p1] = True
                left_mask[members == p2] = False
                if left_mask.any() and not left_mask.all():
                    split = (int(p1), int(p2), left_mask)

        if split is None:
            rows[node_id] = [_LEAF, center, radius, start, end]
            return node_id

        p1, p2, left_mask = split
        left = members[left_mask]
        right = members[~left_mask]
        # Poles lead their halves so each child's center is its split pole.
        left = np.concatenate(([p1], left[left != p1]))
        right = np.concatenate(([p2], right[right != p2]))
        perm[start:start + left.size] = left
        perm[start + left.size:end] = right
        mid = start + left.size
        a = build_range(start, mid)
        b = build_range(mid, end)
        rows[node_id] = [_INTERNAL, center, radius, a, b]
        return node_id

    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 10000))
    try:
        build_range(0, n)
    finally:
        sys.setrecursionlimit(old_limit)
    nodes = np.array(rows, dtype=np.int64)
    return BallTreeIndex(store, leaf_capacity, nodes, perm)


def linear_scan(store: RecordStore, code: np.ndarray, k: int) -> list[Neighbor]:
    """Brute-force oracle: full Hamming scan ranked by (distance, id)."""
    code = np.asarray(code, dtype=np.uint8)
    if code.size != store.codes.shape[1]:
        raise DimMismatchError(
            f"query code has {code.size} bytes, store holds {store.codes.shape[1]}"
        )
    if k == 0:
        return []
    n = len(store)
    if not 0 <= k <= n:
        raise KTooLargeError(f"k={k} outside [0, {n}]")
    dists = hamming_many(store.codes, code)
    return _take_k(store, dists, k)


def linear_scan_cosine(store: RecordStore, z: np.ndarray, k: int) -> list[Neighbor]:
    """Raw-feature twin of linear_scan: ranks by cosine distance 1 - a.b."""
    if store.raws is None:
        raise EmptyDatabaseError("store holds no raw embeddings")
    z = np.asarray(z, dtype=store.raws.dtype)
    if z.shape != (store.raws.shape[1],):
        raise DimMismatchError(
            f"query dim {z.shape} does not match stored dim {store.raws.shape[1]}"
        )
    if k == 0:
        return []
    if k > len(store):
        raise KTooLargeError(f"k={k} exceeds {len(store)} records")
    dists = 1.0 - np.clip(store.raws @ z, -1.0, 1.0)
    return _take_k(store, dists, k)


def _take_k(store: RecordStore, dists: np.ndarray, k: int) -> list[Neighbor]:
    """k smallest by (distance, id), exact under distance ties."""
    n = dists.shape[0]
    if k < n:
        part = np.argpartition(dists, k - 1)[:k]
        thresh = dists[part].max()
        cand = np.flatnonzero(dists <= thresh)
    else:
        cand = np.arange(n)
    order = np.lexsort((store.tie_rank[cand], dists[cand]))
    picked = cand[order[:k]]
    return [
        Neighbor(id=store.ids[i], label=int(store.labels[i]), distance=float(dists[i]))
        for i in picked
    ]


def save(index: BallTreeIndex, path) -> None:
    """Persist to the versioned little-endian '.endx' format."""
    store = index.store
    with open(path, "wb") as fh:
        fh.write(ENDX_MAGIC)
        fh.write(struct.pack("<IQ", store.nbits, len(store)))
        nb = code_nbytes(store.nbits)
        for i, rid in enumerate(store.ids):
            raw_id = rid.encode("utf-8")
            fh.write(struct.pack("<H", len(raw_id)))
            fh.write(raw_id)
            fh.write(struct.pack("<i", int(store.labels[i])))
            fh.write(store.codes[i, :nb].tobytes())
        fh.write(struct.pack("<IQ", index.leaf_capacity, index.nodes.shape[0]))
        for kind, center, radius, a, b in index.nodes:
            fh.write(struct.pack("<BQIQQ", int(kind), int(center), int(radius), int(a), int(b)))
        fh.write(index.perm.astype("<u8").tobytes())


def _read_exact(fh, count: int) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise CorruptFileError(f"truncated file: wanted {count} bytes, got {len(data)}")
    return data


def load(path) -> BallTreeIndex:
    """Load an index saved by ``save``; answers queries identically."""
    with open(path, "rb") as fh:
        magic = fh.read(len(ENDX_MAGIC))
        if magic != ENDX_MAGIC:
            if magic[:4] == ENDX_MAGIC[:4]:
                raise VersionMismatchError(f"unsupported index version {magic!r}")
            raise CorruptFileError(f"bad magic {magic!r}")
        nbits, count = struct.unpack("<IQ", _read_exact(fh, 12))
        if count < 1:
            raise CorruptFileError("index holds no records")
        nb = code_nbytes(nbits)
        ids, labels = [], np.empty(count, dtype=np.int32)
        codes = np.empty((count, nb), dtype=np.uint8)
        for i in range(count):
            (id_len,) = struct.unpack("<H", _read_exact(fh, 2))
            ids.append(_read_exact(fh, id_len).decode("utf-8"))
            (labels[i],) = struct.unpack("<i", _read_exact(fh, 4))
            codes[i] = np.frombuffer(_read_exact(fh, nb), dtype=np.uint8)
        leaf_capacity, node_count = struct.unpack("<IQ", _read_exact(fh, 12))
        nodes = np.empty((node_count, 5), dtype=np.int64)
        for i in range(node_count):
            kind, center, radius, a, b = struct.unpack("<BQIQQ", _read_exact(fh, 29))
            nodes[i] = (kind, center, radius, a, b)
        perm = np.frombuffer(_read_exact(fh, 8 * count), dtype="<u8").astype(np.int64)
        if fh.read(1):
            raise CorruptFileError("trailing bytes after index payload")
    try:
        store = RecordStore(ids=ids, labels=labels, codes=codes, nbits=nbits)
    except Exception as exc:
        raise CorruptFileError(f"inconsistent record payload: {exc}") from exc
    if node_count < 1 or np.unique(perm).size != count or perm.min() < 0 or perm.max() >= count:
        raise CorruptFileError("node table or permutation out of range")
    return BallTreeIndex(store, int(leaf_capacity), nodes, perm)
