"""NVFP4 and MXFP4 group codecs, the comparison baselines.

NVFP4: 16 E2M1 elements under one E4M3 scale (72 bits, 4.5 bits/value).
The scale is the group peak divided by 6 (the E2M1 upper bound), rounded
to nearest E4M3 and clamped to [2^-9, 448].  Group peaks above 448 * 6 =
2688 therefore clip under a direct cast -- that saturation is the format's
documented boundary behavior and is deliberately left in place.  An
optional per-tensor pre-scale (PTS) maps the tensor peak to 2688 before
grouping to keep every group inside the scale's range.

MXFP4: 32 E2M1 elements under one E8M0 power-of-two scale (136 bits,
4.25 bits/value), with the shared exponent floor(log2(peak)) - 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codecs import (
    decode_e2m1_array,
    decode_e4m3_array,
    decode_e8m0_array,
    encode_e2m1_array,
    encode_e4m3_array,
)
from .errors import UsageError

__all__ = [
    "NVFP4_GROUP_SIZE",
    "MXFP4_GROUP_SIZE",
    "NVFP4_MAX_VALUE",
    "PTS_TARGET",
    "Nvfp4Group",
    "Nvfp4GroupBatch",
    "Nvfp4Tensor",
    "Mxfp4Group",
    "Mxfp4GroupBatch",
    "encode_nvfp4_group",
    "decode_nvfp4_group",
    "encode_nvfp4_batch",
    "decode_nvfp4_batch",
    "pts_prescale",
    "encode_mxfp4_group",
    "decode_mxfp4_group",
    "encode_mxfp4_batch",
    "decode_mxfp4_batch",
]

NVFP4_GROUP_SIZE = 16
MXFP4_GROUP_SIZE = 32
NVFP4_MAX_VALUE = 2688.0   # 448 * 6
PTS_TARGET = 2688.0
_E2M1_MAX = 6.0


@dataclass(frozen=True)
class Nvfp4Group:
    scale: int                # E4M3 code, non-negative patterns only
    elems: tuple[int, ...]    # 16 E2M1 codes

    def __post_init__(self):
        if not 0 <= self.scale <= 0x7E:
            raise ValueError("NVFP4 scale must be a non-negative finite E4M3 code")
        if len(self.elems) != NVFP4_GROUP_SIZE:
            raise ValueError(f"NVFP4 group holds {NVFP4_GROUP_SIZE} elements")


@dataclass(frozen=True)
class Mxfp4Group:
    scale: int                # E8M0 code
    elems: tuple[int, ...]    # 32 E2M1 codes

    def __post_init__(self):
        if not 0 <= self.scale <= 0xFE:
            raise ValueError("MXFP4 scale must be a finite E8M0 code")
        if len(self.elems) != MXFP4_GROUP_SIZE:
            raise ValueError(f"MXFP4 group holds {MXFP4_GROUP_SIZE} elements")


@dataclass
class Nvfp4GroupBatch:
    scales: np.ndarray   # (N,) uint8 E4M3 codes
    elems: np.ndarray    # (N, 16) uint8 E2M1 codes

    def __len__(self) -> int:
        return len(self.scales)

    def group(self, i: int) -> Nvfp4Group:
        return Nvfp4Group(int(self.scales[i]), tuple(int(c) for c in self.elems[i]))


@dataclass
class Mxfp4GroupBatch:
    scales: np.ndarray   # (N,) uint8 E8M0 codes
    elems: np.ndarray    # (N, 32) uint8 E2M1 codes

    def __len__(self) -> int:
        return len(self.scales)

    def group(self, i: int) -> Mxfp4Group:
        return Mxfp4Group(int(self.scales[i]), tuple(int(c) for c in self.elems[i]))


@dataclass
class Nvfp4Tensor:
    """A tensor quantized group-wise to NVFP4, optionally pre-scaled."""

    batch: Nvfp4GroupBatch
    dims: tuple[int, ...]
    pts_factor: float | None = None   # binary32 scalar, present iff PTS was applied

    def __post_init__(self):
        if self.pts_factor is not None and not self.pts_factor > 0:
            raise ValueError("pts_factor must be positive when present")

    @property
    def groups(self) -> list[Nvfp4Group]:
        return [self.batch.group(i) for i in range(len(self.batch))]


# ---------------------------------------------------------------------------
# NVFP4

def encode_nvfp4_batch(x) -> Nvfp4GroupBatch:
    """Encode an (N, 16) array of groups."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != NVFP4_GROUP_SIZE:
        raise UsageError(f"expected an (N, {NVFP4_GROUP_SIZE}) array, got {x.shape}")
    if np.isnan(x).any():
        raise ValueError("NVFP4 encoding requires NaN-free input")
    peak = np.abs(x).max(axis=1)
    codes = encode_e4m3_array(peak / _E2M1_MAX)
    # scale range is clamped to [min positive subnormal, 448]; zero or
    # underflowing peaks land on the smallest subnormal and the elements
    # then underflow on their own
    codes = np.maximum(codes, 1).astype(np.uint8)
    scale = decode_e4m3_array(codes)
    elems = encode_e2m1_array(x / scale[:, None])
    return Nvfp4GroupBatch(codes, elems)


def decode_nvfp4_batch(batch: Nvfp4GroupBatch) -> np.ndarray:
    scale = decode_e4m3_array(batch.scales)
    return decode_e2m1_array(batch.elems) * scale[:, None]


def encode_nvfp4_group(v) -> Nvfp4Group:
    vals = [float(x) for x in v]
    if len(vals) != NVFP4_GROUP_SIZE:
        raise UsageError(f"expected {NVFP4_GROUP_SIZE} values, got {len(vals)}")
    return encode_nvfp4_batch(np.asarray(vals)[None, :]).group(0)


def decode_nvfp4_group(g: Nvfp4Group) -> np.ndarray:
    """Elementwise scale * element value, exact in binary64."""
    return decode_nvfp4_batch(
        Nvfp4GroupBatch(np.array([g.scale], dtype=np.uint8),
                        np.array([g.elems], dtype=np.uint8))
    )[0]


def pts_prescale(data: np.ndarray) -> tuple[np.ndarray, float]:
    """Pre-scale a tensor's peak magnitude to 2688, in binary32.

    Returns the scaled binary32 tensor and the binary32 factor.  A tensor
    with no finite nonzero element gets factor 1.0 (a no-op, left to the
    caller's metadata to flag).  The decode path divides by the factor.
    """
    x = np.ascontiguousarray(data, dtype=np.float32)
    peak = float(np.abs(x).max()) if x.size else 0.0
    if not math.isfinite(peak) or peak == 0.0:
        return x.copy(), 1.0
    factor = np.float32(PTS_TARGET) / np.float32(peak)
    return x * factor, float(factor)


# ---------------------------------------------------------------------------
# MXFP4

def _floor_log2(peak: np.ndarray) -> np.ndarray:
    # exact: frexp gives peak = m * 2^e with m in [0.5, 1)
    _, e = np.frexp(peak)
    return e.astype(np.int64) - 1


def encode_mxfp4_batch(x) -> Mxfp4GroupBatch:
    """Encode an (N, 32) array of groups."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != MXFP4_GROUP_SIZE:
        raise UsageError(f"expected an (N, {MXFP4_GROUP_SIZE}) array, got {x.shape}")
    if np.isnan(x).any():
        raise ValueError("MXFP4 encoding requires NaN-free input")
    peak = np.abs(x).max(axis=1)
    exp = np.where(peak > 0, _floor_log2(np.where(peak > 0, peak, 1.0)) - 2, -127)
    exp = np.clip(exp, -127, 127)
    codes = (exp + 127).astype(np.uint8)
    elems = encode_e2m1_array(x * np.exp2(-exp.astype(np.float64))[:, None])
    return Mxfp4GroupBatch(codes, elems)


def decode_mxfp4_batch(batch: Mxfp4GroupBatch) -> np.ndarray:
    scale = decode_e8m0_array(batch.scales)
    return decode_e2m1_array(batch.elems) * scale[:, None]


def encode_mxfp4_group(v) -> Mxfp4Group:
    vals = [float(x) for x in v]
    if len(vals) != MXFP4_GROUP_SIZE:
        raise UsageError(f"expected {MXFP4_GROUP_SIZE} values, got {len(vals)}")
    return encode_mxfp4_batch(np.asarray(vals)[None, :]).group(0)


def decode_mxfp4_group(g: Mxfp4Group) -> np.ndarray:
    return decode_mxfp4_batch(
        Mxfp4GroupBatch(np.array([g.scale], dtype=np.uint8),
                        np.array([g.elems], dtype=np.uint8))
    )[0]
