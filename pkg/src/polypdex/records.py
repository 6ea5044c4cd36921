"""Reference database rows and their columnar in-memory form."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatchError, EmptyDatabaseError
from .hashing import code_nbytes, code_to_int


@dataclass(frozen=True)
class ReferenceRecord:
    """One row of the reference database."""

    id: str
    label: int
    code: np.ndarray                  # packed hash code
    raw: np.ndarray | None = None     # optional unit embedding


@dataclass(frozen=True)
class Neighbor:
    id: str
    label: int
    distance: float


@dataclass(frozen=True)
class RetrievalResult:
    """Ranked evidence for one query plus the voted label."""

    neighbors: tuple[Neighbor, ...]
    predicted_label: int
    vote_histogram: dict[int, int]


@dataclass
class RecordStore:
    """Columnar view of a record list; the unit every search path works on.

    ``tie_rank`` is the rank of each record's id in ascending order; all
    ranking paths break distance ties with it so results are independent of
    insertion order.
    """

    ids: list[str]
    labels: np.ndarray                # (N,) int32
    codes: np.ndarray                 # (N, nbytes) uint8
    nbits: int
    raws: np.ndarray | None = None    # (N, d) float64
    tie_rank: np.ndarray = field(init=False)
    code_ints: list[int] = field(init=False)

    def __post_init__(self):
        n = len(self.ids)
        if n == 0:
            raise EmptyDatabaseError("record store needs at least one record")
        if len(set(self.ids)) != n or any(not i for i in self.ids):
            raise ValueError("record ids must be nonempty and unique")
        if self.codes.shape != (n, code_nbytes(self.nbits)):
            raise DimMismatchError(
                f"code matrix {self.codes.shape} does not hold {n} codes of {self.nbits} bits"
            )
        order = sorted(range(n), key=lambda i: self.ids[i])
        rank = np.empty(n, dtype=np.int64)
        rank[order] = np.arange(n)
        self.tie_rank = rank
        self.code_ints = [code_to_int(self.codes[i]) for i in range(n)]

    def __len__(self) -> int:
        return len(self.ids)

    def label_of(self, record_id: str) -> int:
        try:
            return int(self.labels[self.ids.index(record_id)])
        except ValueError:
            raise KeyError(record_id) from None


def store_from_records(records: list[ReferenceRecord], nbits: int | None = None) -> RecordStore:
    """Pack a record list into columns; raws kept only if every record has one."""
    if not records:
        raise EmptyDatabaseError("no records")
    nbytes = records[0].code.size
    if any(r.code.size != nbytes for r in records):
        raise DimMismatchError("records carry codes of differing lengths")
    raws = None
    if all(r.raw is not None for r in records):
        raws = np.stack([np.asarray(r.raw, dtype=np.float64) for r in records])
    return RecordStore(
        ids=[r.id for r in records],
        labels=np.array([r.label for r in records], dtype=np.int32),
        codes=np.stack([np.asarray(r.code, dtype=np.uint8) for r in records]),
        nbits=nbytes * 8 if nbits is None else nbits,
        raws=raws,
    )
