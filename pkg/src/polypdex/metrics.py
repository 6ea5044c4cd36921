"""Retrieval and classification metrics plus the cross-validation plan.

Ranking metrics pool all scored query-reference pairs globally and sort by
descending score with ties broken by ascending ref id then query id, so
every number here is bit-reproducible regardless of input order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatchError, NoPositivesError, TooFewItemsError


@dataclass(frozen=True)
class ScoredPair:
    query_id: str
    ref_id: str
    score: float          # higher = more similar
    is_match: bool


@dataclass(frozen=True)
class FoldPlan:
    n_items: int
    n_folds: int
    seed: int
    assignment: np.ndarray   # fold index per item

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def reference_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)


def _sorted_flags(pairs: list[ScoredPair]) -> np.ndarray:
    for p in pairs:
        if not np.isfinite(p.score):
            raise ValueError(f"non-finite score for pair ({p.query_id}, {p.ref_id})")
    ordered = sorted(pairs, key=lambda p: (-p.score, p.ref_id, p.query_id))
    return np.array([p.is_match for p in ordered], dtype=bool)


def micro_ap(pairs: list[ScoredPair]) -> float:
    """Average precision over the globally pooled ranking of all pairs."""
    flags = _sorted_flags(pairs)
    n_pos = int(flags.sum())
    if n_pos == 0:
        raise NoPositivesError("micro AP needs at least one positive pair")
    ranks = np.arange(1, flags.size + 1)
    precision = np.cumsum(flags) / ranks
    return float(precision[flags].sum() / n_pos)


def recall_at_precision(pairs: list[ScoredPair], precision: float = 0.9) -> float:
    """Recall of the largest ranking prefix whose precision meets the bar.

    Returns 0 when no prefix qualifies.
    """
    flags = _sorted_flags(pairs)
    n_pos = int(flags.sum())
    if n_pos == 0:
        raise NoPositivesError("recall@precision needs at least one positive pair")
    cum = np.cumsum(flags)
    prefix_precision = cum / np.arange(1, flags.size + 1)
    qualifying = np.flatnonzero(prefix_precision >= precision)
    if qualifying.size == 0:
        return 0.0
    return float(cum[qualifying[-1]] / n_pos)


def acc_at_1(rankings: list[list[str]], truths: list[str]) -> float:
    """Fraction of queries whose top-ranked candidate is the true match."""
    if len(rankings) != len(truths):
        raise LengthMismatchError(f"{len(rankings)} rankings vs {len(truths)} truths")
    if not rankings:
        raise ValueError("need at least one query")
    hits = 0
    for ranking, truth in zip(rankings, truths):
        if not ranking:
            raise ValueError("every query needs at least one candidate")
        hits += ranking[0] == truth
    return hits / len(rankings)


@dataclass(frozen=True)
class ClassificationMetrics:
    """Binary confusion summary; undefined ratios stay None, never 0."""

    accuracy: float
    sensitivity: float | None
    specificity: float | None
    f1: float | None
    tp: int
    fp: int
    tn: int
    fn: int

    def as_dict(self) -> dict:
        return {
            "ACC": self.accuracy,
            "SEN": self.sensitivity,
            "SPE": self.specificity,
            "F1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
        }


def classification_metrics(predictions, truths, positive_class) -> ClassificationMetrics:
    predictions = list(predictions)
    truths = list(truths)
    if len(predictions) != len(truths):
        raise LengthMismatchError(f"{len(predictions)} predictions vs {len(truths)} truths")
    if not predictions:
        raise LengthMismatchError("need at least one prediction")
    tp = sum(p == positive_class and t == positive_class for p, t in zip(predictions, truths))
    fp = sum(p == positive_class and t != positive_class for p, t in zip(predictions, truths))
    fn = sum(p != positive_class and t == positive_class for p, t in zip(predictions, truths))
    tn = len(predictions) - tp - fp - fn
    return ClassificationMetrics(
        accuracy=(tp + tn) / len(predictions),
        sensitivity=tp / (tp + fn) if tp + fn else None,
        specificity=tn / (tn + fp) if tn + fp else None,
        f1=2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else None,
        tp=tp, fp=fp, tn=tn, fn=fn,
    )


def kfold(n_items: int, n_folds: int = 5, seed: int = 0) -> FoldPlan:
    """Seeded shuffle then round-robin assignment; fold sizes differ by <= 1."""
    if n_folds < 1:
        raise TooFewItemsError("need at least one fold")
    if n_folds > n_items:
        raise TooFewItemsError(f"{n_items} items cannot fill {n_folds} folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_items)
    assignment = np.empty(n_items, dtype=np.int64)
    assignment[perm] = np.arange(n_items) % n_folds
    return FoldPlan(n_items=n_items, n_folds=n_folds, seed=seed, assignment=assignment)
