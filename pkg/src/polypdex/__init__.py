"""Lesion image retrieval engine.

Learns unit embeddings with a masked-reconstruction + contrastive objective,
quantizes them to packed binary hash codes, indexes the codes in an exact
Hamming-space ball tree, and answers classification queries by K-nearest-
neighbor voting with ranked retrieval evidence.
"""

from .classify import KnnConfig, classify, classify_code, explain
from .encoder import EncoderParams, decode, encode, init_params, patchify, unpatchify
from .errors import PolypdexError
from .hashing import hamming, hamming_many, pack_bits, quantize, quantize_many, unpack_bits
from .index import BallTreeIndex, QueryBudget, build, linear_scan, linear_scan_cosine, load, save
from .losses import BatchPairing, LossConfig, combined_loss, contrastive_loss, loss_gradients, mae_loss
from .masking import MaskingConfig, MaskPlan, classify_patches, empty_plan, plan_mask
from .metrics import (
    ClassificationMetrics,
    FoldPlan,
    ScoredPair,
    acc_at_1,
    classification_metrics,
    kfold,
    micro_ap,
    recall_at_precision,
)
from .records import Neighbor, RecordStore, ReferenceRecord, RetrievalResult, store_from_records
from .synth import SynthSample, SynthSpec, augment, generate, twin_views
from .training import TrainConfig, train
from .vectors import cosine_similarity, l2_normalize

__version__ = "0.1.0"

__all__ = [
    "BallTreeIndex",
    "BatchPairing",
    "ClassificationMetrics",
    "EncoderParams",
    "FoldPlan",
    "KnnConfig",
    "LossConfig",
    "MaskPlan",
    "MaskingConfig",
    "Neighbor",
    "PolypdexError",
    "QueryBudget",
    "RecordStore",
    "ReferenceRecord",
    "RetrievalResult",
    "ScoredPair",
    "SynthSample",
    "SynthSpec",
    "TrainConfig",
    "acc_at_1",
    "augment",
    "build",
    "classification_metrics",
    "classify",
    "classify_code",
    "classify_patches",
    "combined_loss",
    "contrastive_loss",
    "cosine_similarity",
    "decode",
    "empty_plan",
    "encode",
    "explain",
    "generate",
    "hamming",
    "hamming_many",
    "init_params",
    "kfold",
    "l2_normalize",
    "linear_scan",
    "linear_scan_cosine",
    "load",
    "loss_gradients",
    "mae_loss",
    "micro_ap",
    "pack_bits",
    "patchify",
    "plan_mask",
    "quantize",
    "quantize_many",
    "recall_at_precision",
    "save",
    "store_from_records",
    "train",
    "twin_views",
    "unpack_bits",
    "unpatchify",
]
