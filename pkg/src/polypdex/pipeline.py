"""End-to-end flows: embedding corpora, re-identification evaluation, and
retrieval-based classification under cross-validation.

The re-id protocol mirrors a twin-pool setup: every instance contributes two
augmented views, the first view queries a reference pool made of all second
views, and a query counts as correct when its own twin ranks first. Raw
retrieval ranks by cosine over unit embeddings; hash retrieval quantizes
both sides and ranks by Hamming distance. Exact self-id matches are always
excluded from a query's candidates.
"""

from __future__ import annotations

import time

import numpy as np

from .classify import KnnConfig, classify
from .encoder import EncoderParams, encode, patchify
from .hashing import quantize_many
from .index import build
from .masking import empty_plan
from .metrics import (
    ScoredPair,
    acc_at_1,
    classification_metrics,
    kfold,
    micro_ap,
    recall_at_precision,
)
from .records import RecordStore
from .synth import SynthSample, twin_views


def embed_samples(params: EncoderParams, samples: list[SynthSample], patch_size: int) -> np.ndarray:
    """Inference embeddings: every patch visible (empty mask plan)."""
    out = np.empty((len(samples), params.embed_dim))
    plan = None
    for i, sample in enumerate(samples):
        patches = patchify(sample.image, patch_size)
        if plan is None or plan.masked.size != patches.shape[0]:
            plan = empty_plan(patches.shape[0])
        out[i], _ = encode(params, patches, plan)
    return out


def _ranking_table(scores: np.ndarray, query_ids: list[str], ref_ids: list[str],
                   truths: list[str]) -> tuple[list[ScoredPair], list[list[str]]]:
    """Scored pairs plus per-query candidate rankings, self-ids excluded."""
    pairs = []
    rankings = []
    for qi, qid in enumerate(query_ids):
        row = scores[qi]
        keep = [ri for ri in range(len(ref_ids)) if ref_ids[ri] != qid]
        pairs.extend(
            ScoredPair(
                query_id=qid,
                ref_id=ref_ids[ri],
                score=float(row[ri]),
                is_match=ref_ids[ri] == truths[qi],
            )
            for ri in keep
        )
        ranked = sorted(keep, key=lambda ri: (-row[ri], ref_ids[ri]))
        rankings.append([ref_ids[ri] for ri in ranked])
    return pairs, rankings


def _reid_scores(query_vecs: np.ndarray, ref_vecs: np.ndarray, metric: str, nbits: int):
    if metric == "cosine":
        return np.clip(query_vecs @ ref_vecs.T, -1.0, 1.0)
    q_codes = quantize_many(query_vecs)
    r_codes = quantize_many(ref_vecs)
    dists = np.bitwise_count(q_codes[:, None, :] ^ r_codes[None, :, :]).sum(axis=2)
    return 1.0 - dists / nbits


def reid_eval(params: EncoderParams, samples: list[SynthSample], patch_size: int,
              seed: int = 0) -> dict:
    """Twin re-identification metrics for raw and hashed retrieval."""
    views_a, views_b = twin_views(samples, seed)
    query_ids = [f"{s.instance_id}:a" for s in samples]
    ref_ids = [f"{s.instance_id}:b" for s in samples]
    truths = list(ref_ids)

    t0 = time.perf_counter()
    query_vecs = embed_samples(params, views_a, patch_size)
    ref_vecs = embed_samples(params, views_b, patch_size)
    embed_s = time.perf_counter() - t0

    report: dict = {
        "instances": len(samples),
        "embed_dim": int(params.embed_dim),
        "embed_s": embed_s,
        "variants": {},
    }
    for variant, metric in (("raw", "cosine"), ("hash", "hamming")):
        t0 = time.perf_counter()
        scores = _reid_scores(query_vecs, ref_vecs, metric, params.embed_dim)
        rank_s = time.perf_counter() - t0
        pairs, rankings = _ranking_table(scores, query_ids, ref_ids, truths)
        report["variants"][variant] = {
            "uAP": micro_ap(pairs),
            "Acc@1": acc_at_1(rankings, truths),
            "Recall@90%": recall_at_precision(pairs, 0.9),
            "time_s": rank_s / len(samples),
            "fps": len(samples) / rank_s if rank_s > 0 else float("inf"),
        }
    return report


def classify_cv(params: EncoderParams, samples: list[SynthSample], patch_size: int,
                n_folds: int = 5, knn_k: int = 5, positive_class: int = 2,
                seed: int = 0, leaf_capacity: int = 32) -> dict:
    """K-fold retrieval-based classification, raw and hash variants.

    Each fold serves once as the query set against a reference database
    built from the remaining folds.
    """
    vectors = embed_samples(params, samples, patch_size)
    codes = quantize_many(vectors)
    labels = np.array([s.class_label for s in samples], dtype=np.int32)
    ids = [s.instance_id for s in samples]
    plan = kfold(len(samples), n_folds, seed)

    per_fold: dict[str, list] = {"raw": [], "hash": []}
    predictions: dict[str, dict[int, int]] = {"raw": {}, "hash": {}}
    for fold in range(n_folds):
        ref_idx = plan.reference_indices(fold)
        test_idx = plan.test_indices(fold)
        store = RecordStore(
            ids=[ids[i] for i in ref_idx],
            labels=labels[ref_idx],
            codes=codes[ref_idx],
            nbits=int(params.embed_dim),
            raws=vectors[ref_idx],
        )
        tree = build(store, leaf_capacity=leaf_capacity, seed=seed)
        for variant, metric, database in (("raw", "cosine", store), ("hash", "hamming", tree)):
            cfg = KnnConfig(k=min(knn_k, len(store)), metric=metric)
            preds = [
                classify(database, vectors[i], cfg).predicted_label for i in test_idx
            ]
            for i, p in zip(test_idx, preds):
                predictions[variant][int(i)] = p
            fold_metrics = classification_metrics(preds, labels[test_idx], positive_class)
            per_fold[variant].append(fold_metrics.as_dict())

    report: dict = {
        "n_folds": n_folds,
        "n_samples": len(samples),
        "knn_k": knn_k,
        "positive_class": positive_class,
        "variants": {},
    }
    for variant in ("raw", "hash"):
        ordered = [predictions[variant][i] for i in range(len(samples))]
        overall = classification_metrics(ordered, labels, positive_class)
        folds = per_fold[variant]
        averages = {}
        for key in ("ACC", "SEN", "SPE", "F1"):
            vals = [f[key] for f in folds if f[key] is not None]
            averages[key] = sum(vals) / len(vals) if vals else None
        report["variants"][variant] = {
            "per_fold": folds,
            "fold_average": averages,
            "pooled": overall.as_dict(),
        }
    return report
