"""The 64-element HiF4 block: encoding, decoding, and byte packing.

A block packs 64 signed 4-bit S1P2 elements under 32 bits of shared scaling
metadata: one E6M2 base scale, eight level-2 micro-exponent bits (one per
run of 8 elements) and sixteen level-3 micro-exponent bits (one per run of
4 elements).  That is 288 bits for 64 values, 4.5 bits/value.  Element i
(0-based) decodes to

    value(e6m2) * 2^(e1_8[i // 8] + e1_16[i // 4]) * s1p2(elems[i])

and the whole block is NaN when the E6M2 scale is the NaN code.

Encoding follows a three-stage flow over BF16 inputs:

    1. a max-|x| tree reduction over runs of 4, then 8, then the block;
    2. scale derivation: SF = bf16(vmax * bf16(1/7)), quantized to E6M2,
       whose BF16 reciprocal then drives the two threshold passes
       (>= 4 sets a level-2 bit, >= 2 after the level-2 halving sets a
       level-3 bit);
    3. element quantization of bf16(x * rec) * 2^-(e1_8 + e1_16) to S1P2.

Every multiply by the reciprocal is rounded to BF16 (the datapath is a
BF16 multiplier); multiplies by 2^-e1 are exact exponent adjustments, and
the threshold comparisons are exact.  This makes encode(decode(encode(v)))
reproduce encode(v) bit-for-bit away from the scale-clamping extremes.

Scalar and batch (N, 64) implementations share the same arithmetic and are
tested to agree bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codecs import (
    E6M2_NAN,
    decode_e6m2,
    decode_e6m2_array,
    decode_s1p2_array,
    encode_e6m2,
    encode_e6m2_array,
    encode_s1p2,
    recip_e6m2_array,
    recip_e6m2_to_bf16,
    round_bf16,
    round_bf16_array,
)
from .errors import FormatError, UsageError

__all__ = [
    "BLOCK_SIZE",
    "RECIP7_BF16",
    "Hif4Block",
    "PeakTree",
    "Hif4BlockBatch",
    "peak_reduce",
    "apply_scales",
    "encode_hif4",
    "decode_hif4",
    "pack_hif4",
    "unpack_hif4",
    "encode_hif4_batch",
    "decode_hif4_batch",
    "pack_hif4_batch",
    "unpack_hif4_batch",
]

BLOCK_SIZE = 64
PACKED_SIZE = 36

# BF16 rounding of 1/7; 7 is the largest magnitude the in-block structure
# can represent, and dividing by it is realized as this multiply.
RECIP7_BF16 = round_bf16(1.0 / 7.0)

_ZEROS8 = (0,) * 8
_ZEROS16 = (0,) * 16
_ZEROS64 = (0,) * 64


@dataclass(frozen=True)
class Hif4Block:
    """One encoded 64-element unit (36 bytes when packed)."""

    e6m2: int
    e1_8: tuple[int, ...]
    e1_16: tuple[int, ...]
    elems: tuple[int, ...]

    def __post_init__(self):
        if not 0 <= self.e6m2 <= 0xFF:
            raise ValueError("e6m2 must be an 8-bit code")
        if len(self.e1_8) != 8 or any(b not in (0, 1) for b in self.e1_8):
            raise ValueError("e1_8 must be 8 bits")
        if len(self.e1_16) != 16 or any(b not in (0, 1) for b in self.e1_16):
            raise ValueError("e1_16 must be 16 bits")
        if len(self.elems) != BLOCK_SIZE or any(not 0 <= c <= 15 for c in self.elems):
            raise ValueError("elems must be 64 4-bit codes")

    @property
    def is_nan(self) -> bool:
        return self.e6m2 == E6M2_NAN


@dataclass(frozen=True)
class PeakTree:
    """Local peak magnitudes: 16 quad maxima, 8 pair maxima, block maximum."""

    v16: tuple[float, ...]
    v8: tuple[float, ...]
    vmax: float


@dataclass
class Hif4BlockBatch:
    """N blocks as parallel arrays; the vectorized twin of Hif4Block."""

    e6m2: np.ndarray   # (N,)  uint8
    e1_8: np.ndarray   # (N, 8)  uint8 bits
    e1_16: np.ndarray  # (N, 16) uint8 bits
    elems: np.ndarray  # (N, 64) uint8 4-bit codes

    def __len__(self) -> int:
        return len(self.e6m2)

    def block(self, i: int) -> Hif4Block:
        return Hif4Block(
            int(self.e6m2[i]),
            tuple(int(b) for b in self.e1_8[i]),
            tuple(int(b) for b in self.e1_16[i]),
            tuple(int(c) for c in self.elems[i]),
        )


def _nan_block() -> Hif4Block:
    return Hif4Block(E6M2_NAN, _ZEROS8, _ZEROS16, _ZEROS64)


def peak_reduce(v) -> PeakTree:
    """Three-level max-|x| tree over a 64-vector."""
    vals = [float(x) for x in v]
    if len(vals) != BLOCK_SIZE:
        raise UsageError(f"expected {BLOCK_SIZE} values, got {len(vals)}")
    if any(math.isnan(x) for x in vals):
        raise ValueError("peak_reduce input must be NaN-free")
    v16 = tuple(max(abs(x) for x in vals[4 * i : 4 * i + 4]) for i in range(16))
    v8 = tuple(max(v16[2 * j], v16[2 * j + 1]) for j in range(8))
    return PeakTree(v16, v8, max(v8))


def apply_scales(v_bf16, rec: float, e1_8, e1_16) -> list[float]:
    """The scaled 64-vector fed to S1P2 quantization.

    Each element is bf16(x * rec) * 2^-(e1_8 + e1_16); the power-of-two
    part is exact, so only the reciprocal multiply rounds.
    """
    return [
        round_bf16(float(x) * rec) * 2.0 ** -(e1_8[i // 8] + e1_16[i // 4])
        for i, x in enumerate(v_bf16)
    ]


def encode_hif4(v) -> Hif4Block:
    """Encode 64 values (BF16; wider inputs are BF16-rounded first).

    Any NaN or infinity in the input yields the all-NaN block; an all-zero
    input yields the minimum scale with all-zero metadata and elements.
    """
    vals = [float(x) for x in v]
    if len(vals) != BLOCK_SIZE:
        raise UsageError(f"expected {BLOCK_SIZE} values, got {len(vals)}")
    if any(not math.isfinite(x) for x in vals):
        return _nan_block()
    vb = [round_bf16(x) for x in vals]
    if any(math.isinf(x) for x in vb):   # BF16 rounding can overflow
        return _nan_block()

    tree = peak_reduce(vb)
    if tree.vmax == 0.0:
        return Hif4Block(0x00, _ZEROS8, _ZEROS16, _ZEROS64)

    sf = round_bf16(tree.vmax * RECIP7_BF16)
    code = encode_e6m2(sf)
    rec = recip_e6m2_to_bf16(code)

    e1_8 = tuple(1 if round_bf16(p * rec) >= 4.0 else 0 for p in tree.v8)
    e1_16 = tuple(
        1 if round_bf16(p * rec) * 2.0 ** -e1_8[k // 2] >= 2.0 else 0
        for k, p in enumerate(tree.v16)
    )
    scaled = apply_scales(vb, rec, e1_8, e1_16)
    elems = tuple(encode_s1p2(x) for x in scaled)
    return Hif4Block(code, e1_8, e1_16, elems)


def decode_hif4(b: Hif4Block) -> np.ndarray:
    """Decode to 64 binary64 reals, exactly (no rounding occurs)."""
    if b.is_nan:
        return np.full(BLOCK_SIZE, np.nan)
    scale = decode_e6m2(b.e6m2)
    e8 = np.repeat(np.asarray(b.e1_8, dtype=np.int64), 8)
    e16 = np.repeat(np.asarray(b.e1_16, dtype=np.int64), 4)
    return scale * np.exp2(e8 + e16).astype(np.float64) * decode_s1p2_array(list(b.elems))


# ---------------------------------------------------------------------------
# Byte packing.  Layout of the 36-byte unit:
#   byte 0      E6M2 scale code
#   byte 1      level-2 bits, bit j = e1_8[j]
#   bytes 2-3   level-3 bits, little-endian, bit k = e1_16[k]
#   bytes 4-35  element nibbles; element 2t in the low nibble of byte 4+t,
#               element 2t+1 in the high nibble

def pack_hif4(b: Hif4Block) -> bytes:
    out = bytearray(PACKED_SIZE)
    out[0] = b.e6m2
    out[1] = sum(bit << j for j, bit in enumerate(b.e1_8))
    e16 = sum(bit << k for k, bit in enumerate(b.e1_16))
    out[2] = e16 & 0xFF
    out[3] = e16 >> 8
    for t in range(32):
        out[4 + t] = b.elems[2 * t] | (b.elems[2 * t + 1] << 4)
    return bytes(out)


def unpack_hif4(data: bytes) -> Hif4Block:
    if len(data) != PACKED_SIZE:
        raise FormatError(f"packed block must be {PACKED_SIZE} bytes, got {len(data)}")
    e1_8 = tuple((data[1] >> j) & 1 for j in range(8))
    e16 = data[2] | (data[3] << 8)
    e1_16 = tuple((e16 >> k) & 1 for k in range(16))
    elems = []
    for t in range(32):
        elems.append(data[4 + t] & 0xF)
        elems.append(data[4 + t] >> 4)
    return Hif4Block(data[0], e1_8, e1_16, tuple(elems))


# ---------------------------------------------------------------------------
# Batch pipeline (bit-identical to the scalar path, tested as such)

def encode_hif4_batch(x) -> Hif4BlockBatch:
    """Encode an (N, 64) array of values into N blocks."""
    x32 = np.array(x, dtype=np.float32, copy=True)
    if x32.ndim != 2 or x32.shape[1] != BLOCK_SIZE:
        raise UsageError(f"expected an (N, {BLOCK_SIZE}) array, got {x32.shape}")
    n = x32.shape[0]

    xb32 = round_bf16_array(x32)
    bad = ~np.isfinite(xb32).all(axis=1)
    xb32[bad] = 0.0
    xb = xb32.astype(np.float64)

    a = np.abs(xb)
    v16 = a.reshape(n, 16, 4).max(axis=2)
    v8 = v16.reshape(n, 8, 2).max(axis=2)
    vmax = v8.max(axis=1)
    zero = vmax == 0.0

    sf = round_bf16_array(vmax * RECIP7_BF16).astype(np.float64)
    codes = encode_e6m2_array(np.where(zero, 2.0 ** -48, sf))
    codes[zero] = 0x00
    rec = recip_e6m2_array(codes)

    p8 = round_bf16_array(v8 * rec[:, None]).astype(np.float64)
    e8 = (p8 >= 4.0).astype(np.uint8)
    p16 = round_bf16_array(v16 * rec[:, None]).astype(np.float64)
    p16 = p16 * np.exp2(-np.repeat(e8, 2, axis=1).astype(np.float64))
    e16 = (p16 >= 2.0).astype(np.uint8)

    shift = np.repeat(e8, 8, axis=1).astype(np.float64)
    shift += np.repeat(e16, 4, axis=1)
    scaled = round_bf16_array(xb * rec[:, None]).astype(np.float64) * np.exp2(-shift)
    q = np.rint(scaled * 4.0)
    mags = np.minimum(np.abs(q), 7.0).astype(np.uint8)
    signs = np.signbit(scaled).astype(np.uint8)
    elems = (signs << 3) | mags

    codes[bad] = E6M2_NAN
    for arr in (e8, e16, elems):
        arr[zero | bad] = 0
    return Hif4BlockBatch(codes, e8, e16, elems)


def decode_hif4_batch(batch: Hif4BlockBatch) -> np.ndarray:
    """Decode N blocks to an (N, 64) binary64 array, exactly."""
    scale = decode_e6m2_array(batch.e6m2)   # NaN rows propagate through the product
    exps = np.repeat(batch.e1_8, 8, axis=1).astype(np.float64)
    exps += np.repeat(batch.e1_16, 4, axis=1)
    return scale[:, None] * np.exp2(exps) * decode_s1p2_array(batch.elems)


def pack_hif4_batch(batch: Hif4BlockBatch) -> bytes:
    n = len(batch)
    out = np.zeros((n, PACKED_SIZE), dtype=np.uint8)
    out[:, 0] = batch.e6m2
    out[:, 1] = (batch.e1_8 << np.arange(8, dtype=np.uint8)).sum(axis=1)
    e16 = (batch.e1_16.astype(np.uint32) << np.arange(16, dtype=np.uint32)).sum(axis=1)
    out[:, 2] = e16 & 0xFF
    out[:, 3] = e16 >> 8
    out[:, 4:] = batch.elems[:, 0::2] | (batch.elems[:, 1::2] << 4)
    return out.tobytes()


def unpack_hif4_batch(data: bytes, n: int) -> Hif4BlockBatch:
    if len(data) != n * PACKED_SIZE:
        raise FormatError(
            f"expected {n * PACKED_SIZE} packed bytes for {n} blocks, got {len(data)}"
        )
    raw = np.frombuffer(data, dtype=np.uint8).reshape(n, PACKED_SIZE)
    e1_8 = (raw[:, 1:2] >> np.arange(8, dtype=np.uint8)) & 1
    e16 = raw[:, 2].astype(np.uint32) | (raw[:, 3].astype(np.uint32) << 8)
    e1_16 = ((e16[:, None] >> np.arange(16, dtype=np.uint32)) & 1).astype(np.uint8)
    elems = np.empty((n, BLOCK_SIZE), dtype=np.uint8)
    elems[:, 0::2] = raw[:, 4:] & 0xF
    elems[:, 1::2] = raw[:, 4:] >> 4
    return Hif4BlockBatch(raw[:, 0].copy(), e1_8, e1_16, elems)
