"""Retrieval latency benchmark: hashed ball-tree query vs raw cosine scan.

The corpus is synthetic but clustered (unit embeddings scattered around
random centers, then sign-quantized), matching the geometry of real encoder
outputs rather than the uniform-random worst case that no metric index can
prune. Timing runs pinned to a single BLAS thread and reports medians over
per-query wall-clock times; the machine note and corpus parameters travel
with the numbers.
"""

from __future__ import annotations

import platform
import time

import numpy as np
from threadpoolctl import threadpool_limits

from .hashing import quantize_many
from .index import QueryBudget, build, linear_scan_cosine
from .records import RecordStore


def clustered_embeddings(count: int, dim: int, rng: np.random.Generator,
                         cluster_size: int = 500, spread: float = 0.35) -> np.ndarray:
    """Unit vectors grouped around random centers; spread sets within-cluster noise."""
    n_clusters = max(1, count // cluster_size)
    centers = rng.standard_normal((n_clusters, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    assign = rng.integers(0, n_clusters, size=count)
    points = centers[assign] + spread * rng.standard_normal((count, dim))
    points /= np.linalg.norm(points, axis=1, keepdims=True)
    return points


def bench_retrieval(corpus_size: int = 100_000, dim: int = 256, code_bits: int | None = None,
                    n_queries: int = 1_000, k: int = 5, leaf_capacity: int = 32,
                    seed: int = 0) -> dict:
    """Median per-query latency for hashed tree search vs raw cosine scan."""
    if corpus_size < 1 or n_queries < 1 or k < 1:
        raise ValueError("corpus_size, n_queries and k must all be >= 1")
    code_bits = dim if code_bits is None else code_bits
    rng = np.random.default_rng(seed)

    vectors = clustered_embeddings(corpus_size, dim, rng)
    codes = quantize_many(vectors[:, :code_bits])
    ids = [f"rec-{i:07d}" for i in range(corpus_size)]
    labels = np.ones(corpus_size, dtype=np.int32)
    store = RecordStore(ids=ids, labels=labels, codes=codes, nbits=code_bits,
                        raws=vectors)

    t0 = time.perf_counter()
    tree = build(store, leaf_capacity=leaf_capacity, seed=seed)
    build_s = time.perf_counter() - t0

    # Queries: noisy resamples of stored records, the near-duplicate workload
    # retrieval serves.
    picks = rng.integers(0, corpus_size, size=n_queries)
    queries = vectors[picks] + 0.05 * rng.standard_normal((n_queries, dim))
    queries /= np.linalg.norm(queries, axis=1, keepdims=True)
    query_codes = quantize_many(queries[:, :code_bits])

    budget = QueryBudget(k=k)
    raws32 = np.ascontiguousarray(store.raws.astype(np.float32))
    store32 = RecordStore(ids=ids, labels=labels, codes=codes, nbits=code_bits,
                          raws=raws32)

    hash_times = np.empty(n_queries)
    raw_times = np.empty(n_queries)
    with threadpool_limits(limits=1):
        for i in range(n_queries):
            t0 = time.perf_counter()
            tree.query(query_codes[i], budget)
            hash_times[i] = time.perf_counter() - t0
        q32 = queries.astype(np.float32)
        for i in range(n_queries):
            t0 = time.perf_counter()
            linear_scan_cosine(store32, q32[i], k)
            raw_times[i] = time.perf_counter() - t0

    hash_median = float(np.median(hash_times))
    raw_median = float(np.median(raw_times))
    return {
        "corpus_size": corpus_size,
        "dim": dim,
        "code_bits": code_bits,
        "n_queries": n_queries,
        "k": k,
        "leaf_capacity": leaf_capacity,
        "seed": seed,
        "corpus": "clustered synthetic unit embeddings, sign-quantized",
        "build_s": build_s,
        "hash_query_s": hash_median,
        "raw_scan_s": raw_median,
        "fps": 1.0 / hash_median if hash_median > 0 else float("inf"),
        "speedup": raw_median / hash_median if hash_median > 0 else float("inf"),
        "single_thread": True,
        "machine": f"{platform.machine()} / {platform.processor() or 'unknown cpu'} / "
                   f"python {platform.python_version()}",
    }


def format_bench_report(report: dict) -> str:
    lines = [
        f"corpus: {report['corpus_size']} records, dim {report['dim']}, "
        f"{report['code_bits']}-bit codes ({report['corpus']})",
        f"queries: {report['n_queries']} x top-{report['k']}, single query thread",
        f"build: {report['build_s']:.3f} s (leaf capacity {report['leaf_capacity']})",
        f"hash ball-tree query: {report['hash_query_s'] * 1e3:.3f} ms median "
        f"({report['fps']:.1f} qps)",
        f"raw cosine scan:      {report['raw_scan_s'] * 1e3:.3f} ms median",
        f"speedup: {report['speedup']:.1f}x",
        f"machine: {report['machine']}",
    ]
    return "\n".join(lines)
