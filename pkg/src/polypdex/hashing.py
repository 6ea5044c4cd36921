"""Sign quantization and packed binary-code arithmetic.

A hash code is a packed ``uint8`` array: bit ``k`` of the code is 1 iff
embedding coordinate ``k`` is non-negative. Bits are packed MSB-first within
each byte and trailing pad bits of the last byte are always zero, so codes of
equal bit length are byte-comparable and Hamming distance is a plain
XOR-popcount over the packed bytes.
"""

from __future__ import annotations

import numpy as np

from .errors import CorruptFileError, DimMismatchError


def code_nbytes(nbits: int) -> int:
    return (nbits + 7) // 8


def pack_bits(bits) -> np.ndarray:
    """Pack a 0/1 bit vector into bytes, MSB-first, zero-padded."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 1:
        raise DimMismatchError(f"expected a 1-D bit vector, got shape {bits.shape}")
    return np.packbits(bits, bitorder="big")


def unpack_bits(code: np.ndarray, nbits: int) -> np.ndarray:
    """Inverse of pack_bits; returns the first ``nbits`` bits as 0/1 uint8."""
    code = np.asarray(code, dtype=np.uint8)
    if code.size != code_nbytes(nbits):
        raise DimMismatchError(f"{code.size} bytes cannot hold exactly {nbits} bits")
    return np.unpackbits(code, count=nbits, bitorder="big")


def quantize(z) -> np.ndarray:
    """Binarize an embedding by coordinate sign: bit k = 1 iff z[k] >= 0.

    Zero coordinates map to 1. Normalization is not required.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1:
        raise DimMismatchError(f"expected a 1-D embedding, got shape {z.shape}")
    return pack_bits((z >= 0.0).astype(np.uint8))


def quantize_many(zs: np.ndarray) -> np.ndarray:
    """Row-wise quantize; returns an (n, nbytes) packed code matrix."""
    zs = np.asarray(zs, dtype=np.float64)
    if zs.ndim != 2:
        raise DimMismatchError(f"expected a 2-D embedding stack, got shape {zs.shape}")
    return np.packbits((zs >= 0.0).astype(np.uint8), axis=1, bitorder="big")


def hamming(a: np.ndarray, b: np.ndarray) -> int:
    """Hamming distance between two packed codes of equal byte length.

    Pad bits are zero on both sides by construction, so they never contribute.
    """
    a = np.asarray(a, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    if a.shape != b.shape:
        raise DimMismatchError(f"code length mismatch: {a.shape} vs {b.shape}")
    return int(np.bitwise_count(np.bitwise_xor(a, b)).sum())


def hamming_many(codes: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Hamming distance from every row of a packed code matrix to one code."""
    codes = np.asarray(codes, dtype=np.uint8)
    q = np.asarray(q, dtype=np.uint8)
    if codes.ndim != 2 or codes.shape[1] != q.size:
        raise DimMismatchError(f"codes {codes.shape} incompatible with query of {q.size} bytes")
    # Widen to uint64 words when the row width allows; one popcount per word
    # instead of eight.
    if codes.shape[1] % 8 == 0:
        c = np.ascontiguousarray(codes).view(np.uint64)
        qq = np.ascontiguousarray(q).view(np.uint64)
        return np.bitwise_count(np.bitwise_xor(c, qq)).sum(axis=1, dtype=np.int64)
    return np.bitwise_count(np.bitwise_xor(codes, q)).sum(axis=1, dtype=np.int64)


def code_to_int(code: np.ndarray) -> int:
    """Packed code as an arbitrary-precision int for scalar XOR/popcount."""
    return int.from_bytes(np.asarray(code, dtype=np.uint8).tobytes(), "big")


def code_to_hex(code: np.ndarray) -> str:
    return np.asarray(code, dtype=np.uint8).tobytes().hex()


def hex_to_code(hex_str: str, nbits: int) -> np.ndarray:
    """Parse a hex string into a packed code, validating length and pad bits."""
    try:
        raw = bytes.fromhex(hex_str)
    except ValueError as exc:
        raise CorruptFileError(f"invalid hex code: {exc}") from exc
    if len(raw) != code_nbytes(nbits):
        raise DimMismatchError(
            f"hex code holds {len(raw)} bytes, expected {code_nbytes(nbits)} for {nbits} bits"
        )
    code = np.frombuffer(raw, dtype=np.uint8).copy()
    pad = code_nbytes(nbits) * 8 - nbits
    if pad and (code[-1] & ((1 << pad) - 1)):
        raise CorruptFileError("nonzero pad bits in trailing byte")
    return code
