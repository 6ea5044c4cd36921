"""Versioned little-endian binary formats for embeddings and encoder params.

Embedding file (".endf"): magic "ENDF1\\0", u32 dim, u64 count, then per
record a u16 id byte length, the UTF-8 id, an i32 label, and dim float32
values. Params file (".endp"): magic "ENDP1\\0", u32 patch_size, u32 hidden,
u32 embed dim, then the parameter tensors as float32 in declared order.
"""

from __future__ import annotations

import struct

import numpy as np

from .encoder import EncoderParams
from .errors import CorruptFileError, VersionMismatchError

ENDF_MAGIC = b"ENDF1\0"
ENDP_MAGIC = b"ENDP1\0"


def _read_exact(fh, count: int) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise CorruptFileError(f"truncated file: wanted {count} bytes, got {len(data)}")
    return data


def _check_magic(fh, magic: bytes) -> None:
    got = fh.read(len(magic))
    if got != magic:
        if got[:4] == magic[:4]:
            raise VersionMismatchError(f"unsupported version {got!r}")
        raise CorruptFileError(f"bad magic {got!r}")


def write_embeddings(path, ids: list[str], labels, vectors: np.ndarray) -> None:
    vectors = np.asarray(vectors)
    if vectors.ndim != 2 or vectors.shape[0] != len(ids) or len(labels) != len(ids):
        raise ValueError("ids, labels and vector rows must align")
    with open(path, "wb") as fh:
        fh.write(ENDF_MAGIC)
        fh.write(struct.pack("<IQ", vectors.shape[1], vectors.shape[0]))
        for rid, label, vec in zip(ids, labels, vectors):
            raw_id = rid.encode("utf-8")
            fh.write(struct.pack("<H", len(raw_id)))
            fh.write(raw_id)
            fh.write(struct.pack("<i", int(label)))
            fh.write(vec.astype("<f4").tobytes())


def read_embeddings(path) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Returns (ids, labels int32, vectors float32 of shape (count, dim))."""
    with open(path, "rb") as fh:
        _check_magic(fh, ENDF_MAGIC)
        dim, count = struct.unpack("<IQ", _read_exact(fh, 12))
        ids: list[str] = []
        labels = np.empty(count, dtype=np.int32)
        vectors = np.empty((count, dim), dtype=np.float32)
        for i in range(count):
            (id_len,) = struct.unpack("<H", _read_exact(fh, 2))
            ids.append(_read_exact(fh, id_len).decode("utf-8"))
            (labels[i],) = struct.unpack("<i", _read_exact(fh, 4))
            vectors[i] = np.frombuffer(_read_exact(fh, 4 * dim), dtype="<f4")
        if fh.read(1):
            raise CorruptFileError("trailing bytes after embedding payload")
    return ids, labels, vectors


# Parameter tensors in their declared on-disk order.
_PARAM_ORDER = ("w_embed", "b_embed", "mask_token", "w_proj", "b_proj", "w_decode", "b_decode")


def write_params(path, params: EncoderParams, patch_size: int) -> None:
    if patch_size * patch_size != params.patch_pixels:
        raise ValueError(
            f"patch_size {patch_size} inconsistent with patch_pixels {params.patch_pixels}"
        )
    with open(path, "wb") as fh:
        fh.write(ENDP_MAGIC)
        fh.write(struct.pack("<III", patch_size, params.hidden_dim, params.embed_dim))
        arrays = params.field_arrays()
        for name in _PARAM_ORDER:
            fh.write(arrays[name].astype("<f4").tobytes())


def read_params(path) -> tuple[EncoderParams, int]:
    """Returns (params, patch_size); tensors upcast to float64."""
    with open(path, "rb") as fh:
        _check_magic(fh, ENDP_MAGIC)
        patch_size, hidden, dim = struct.unpack("<III", _read_exact(fh, 12))
        if patch_size < 1 or hidden < 1 or dim < 1:
            raise CorruptFileError("non-positive shape in params header")
        pp = patch_size * patch_size
        shapes = {
            "w_embed": (pp, hidden),
            "b_embed": (hidden,),
            "mask_token": (hidden,),
            "w_proj": (hidden, dim),
            "b_proj": (dim,),
            "w_decode": (hidden, pp),
            "b_decode": (pp,),
        }
        arrays = {}
        for name in _PARAM_ORDER:
            shape = shapes[name]
            n = int(np.prod(shape))
            arrays[name] = (
                np.frombuffer(_read_exact(fh, 4 * n), dtype="<f4")
                .astype(np.float64)
                .reshape(shape)
            )
        if fh.read(1):
            raise CorruptFileError("trailing bytes after params payload")
    return EncoderParams(**arrays), patch_size
