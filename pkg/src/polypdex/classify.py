"""K-nearest-neighbor majority vote over the reference database.

The predicted label is the class with the most votes among the K nearest
records. Vote ties go to the class of the single nearest neighbor among the
tied classes (distance information is already in hand), then to the lowest
class index; neighbor-distance ties were already broken by ascending id, so
predictions are independent of reference insertion order.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDatabaseError, KTooLargeError, UnknownIdError
from .hashing import quantize
from .index import BallTreeIndex, QueryBudget, linear_scan, linear_scan_cosine
from .records import Neighbor, RecordStore, RetrievalResult


@dataclass(frozen=True)
class KnnConfig:
    k: int = 5
    metric: str = "hamming"   # "hamming" over codes or "cosine" over raws

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.metric not in ("hamming", "cosine"):
            raise ValueError(f"unknown metric {self.metric!r}")


def _store_of(database) -> RecordStore:
    return database.store if isinstance(database, BallTreeIndex) else database


def vote(neighbors: list[Neighbor]) -> tuple[int, dict[int, int]]:
    """Majority label over a ranked neighbor list, with the tie rule applied."""
    histogram = Counter(nb.label for nb in neighbors)
    top = max(histogram.values())
    tied = {label for label, count in histogram.items() if count == top}
    if len(tied) == 1:
        predicted = next(iter(tied))
    else:
        predicted = next((nb.label for nb in neighbors if nb.label in tied), min(tied))
    return predicted, dict(sorted(histogram.items()))


def classify(database, query_embedding: np.ndarray, cfg: KnnConfig) -> RetrievalResult:
    """Retrieve K nearest by the configured metric and vote on the label.

    Hamming queries quantize the embedding first and use the ball tree when
    one is supplied; cosine queries scan the stored raw embeddings.
    """
    store = _store_of(database)
    if len(store) == 0:
        raise EmptyDatabaseError("reference database is empty")
    if cfg.k > len(store):
        raise KTooLargeError(f"K={cfg.k} exceeds database size {len(store)}")

    if cfg.metric == "cosine":
        neighbors = linear_scan_cosine(store, query_embedding, cfg.k)
    else:
        neighbors = classify_code_neighbors(database, quantize(query_embedding), cfg.k)
    predicted, histogram = vote(neighbors)
    return RetrievalResult(
        neighbors=tuple(neighbors),
        predicted_label=predicted,
        vote_histogram=histogram,
    )


def classify_code(database, code: np.ndarray, cfg: KnnConfig) -> RetrievalResult:
    """classify() for callers that already hold a hash code."""
    store = _store_of(database)
    if cfg.k > len(store):
        raise KTooLargeError(f"K={cfg.k} exceeds database size {len(store)}")
    neighbors = classify_code_neighbors(database, code, cfg.k)
    predicted, histogram = vote(neighbors)
    return RetrievalResult(
        neighbors=tuple(neighbors),
        predicted_label=predicted,
        vote_histogram=histogram,
    )


def classify_code_neighbors(database, code: np.ndarray, k: int) -> list[Neighbor]:
    if isinstance(database, BallTreeIndex):
        return database.query(code, QueryBudget(k=k))
    return linear_scan(database, code, k)


def explain(result: RetrievalResult, database, query_id: str | None = None) -> dict:
    """Structured evidence report; round-trips through JSON losslessly."""
    store = _store_of(database)
    known = set(store.ids)
    for nb in result.neighbors:
        if nb.id not in known:
            raise UnknownIdError(f"neighbor id {nb.id!r} not in reference database")
    counts = sorted(result.vote_histogram.values(), reverse=True)
    margin = counts[0] - (counts[1] if len(counts) > 1 else 0)
    return {
        "query_id": query_id,
        "predicted_label": result.predicted_label,
        "margin": margin,
        "vote_histogram": {str(label): count for label, count in result.vote_histogram.items()},
        "neighbors": [
            {"id": nb.id, "label": nb.label, "distance": nb.distance, "rank": rank}
            for rank, nb in enumerate(result.neighbors, start=1)
        ],
    }
