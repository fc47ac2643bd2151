"""Bit-exact codecs for the mini floating-point formats used by the 4-bit
block formats in this package.

Formats:

    E6M2   unsigned 8-bit float: 6-bit exponent (bias 48), 2-bit mantissa,
           hidden leading 1.  Normal numbers only -- no zero, no infinity,
           no subnormals; the single NaN is 0b111111_11.  Finite values
           cover [2^-48, 1.5 * 2^15].
    S1P2   4-bit sign-magnitude fixed point: sign, 1 integer bit, 2 fraction
           bits.  Values (-1)^s * m/4 for m in 0..7; +0 and -0 both exist.
    E2M1   4-bit float: sign, 2-bit exponent (bias 1), 1-bit mantissa, one
           subnormal.  Magnitudes are exactly {0, 0.5, 1, 1.5, 2, 3, 4, 6}.
    E4M3   8-bit float: sign, 4-bit exponent (bias 7), 3-bit mantissa,
           subnormals, NaN at S_1111_111, no infinity.  Max finite 448,
           min positive subnormal 2^-9.
    E8M0   8-bit unsigned power-of-two exponent, bias 127; code 255 is NaN.
    BF16   1-8-7 truncated binary32, implemented as a rounding operation.

Every decode is total over its code space and exact in binary64 (each
representable value of each format fits a binary64 exactly).  Every encode
rounds to the nearest representable value with ties to even and saturates
at the largest finite magnitude.  Scalar and numpy-array flavors share one
arithmetic core so the two cannot drift apart.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "E6M2_NAN",
    "E6M2_MAX_CODE",
    "E6M2_MIN_VALUE",
    "E6M2_MAX_VALUE",
    "E4M3_NAN",
    "E4M3_MAX_CODE",
    "E4M3_MAX_VALUE",
    "E4M3_MIN_SUBNORMAL",
    "E8M0_NAN",
    "E2M1_MAGNITUDES",
    "decode_e6m2",
    "encode_e6m2",
    "recip_e6m2_to_bf16",
    "decode_s1p2",
    "encode_s1p2",
    "decode_e2m1",
    "encode_e2m1",
    "decode_e4m3",
    "encode_e4m3",
    "decode_e8m0",
    "e8m0_from_exponent",
    "round_bf16",
    "round_bf16_array",
    "decode_e6m2_array",
    "encode_e6m2_array",
    "recip_e6m2_array",
    "decode_s1p2_array",
    "encode_s1p2_array",
    "decode_e2m1_array",
    "encode_e2m1_array",
    "decode_e4m3_array",
    "encode_e4m3_array",
    "decode_e8m0_array",
    "format_table",
]

# ---------------------------------------------------------------------------
# Format constants

E6M2_BIAS = 48
E6M2_NAN = 0xFF          # 0b111111_11
E6M2_MAX_CODE = 0xFE     # 0b111111_10
E6M2_MIN_VALUE = 2.0 ** -48
E6M2_MAX_VALUE = 1.5 * 2.0 ** 15   # 49152

E4M3_BIAS = 7
E4M3_NAN = 0x7F          # positive NaN pattern; 0xFF is the negative one
E4M3_MAX_CODE = 0x7E
E4M3_MAX_VALUE = 448.0
E4M3_MIN_SUBNORMAL = 2.0 ** -9

E8M0_BIAS = 127
E8M0_NAN = 0xFF

E2M1_MAGNITUDES = (0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0)

# binary32 values with |x| at or above this round to infinity under RNE
_F32_OVERFLOW = (2.0 - 2.0 ** -24) * 2.0 ** 127


# ---------------------------------------------------------------------------
# Decode tables (exact binary64 values, one entry per code)

def _build_e6m2_table() -> np.ndarray:
    t = np.empty(256, dtype=np.float64)
    for c in range(256):
        exp = (c >> 2) - E6M2_BIAS
        mant = c & 3
        t[c] = math.ldexp(4 + mant, exp - 2)
    t[E6M2_NAN] = math.nan
    return t


def _build_recip_table() -> np.ndarray:
    # 1/(1.M) for the four mantissas, pre-rounded to BF16.  The full
    # reciprocal is then a pure exponent subtraction, which is why the
    # conversion is realizable as a 4-entry LUT in hardware.
    lut = [(0, 1.0), (-1, 1.6015625), (-1, 1.3359375), (-1, 1.140625)]
    t = np.empty(256, dtype=np.float64)
    for c in range(256):
        exp = (c >> 2) - E6M2_BIAS
        off, sig = lut[c & 3]
        t[c] = math.ldexp(sig, -exp + off)
    t[E6M2_NAN] = math.nan
    return t


def _build_s1p2_table() -> np.ndarray:
    t = np.empty(16, dtype=np.float64)
    for c in range(16):
        mag = (c & 7) / 4.0
        t[c] = -mag if c & 8 else mag   # code 0b1000 decodes to -0.0
    return t


def _build_e2m1_table() -> np.ndarray:
    t = np.empty(16, dtype=np.float64)
    for c in range(16):
        mag = E2M1_MAGNITUDES[c & 7]
        t[c] = -mag if c & 8 else mag
    return t


def _build_e4m3_table() -> np.ndarray:
    t = np.empty(256, dtype=np.float64)
    for c in range(256):
        eb = (c >> 3) & 0xF
        m = c & 7
        if eb == 0xF and m == 7:
            t[c] = math.nan
            continue
        if eb == 0:
            mag = math.ldexp(m, -9)             # subnormal: m/8 * 2^-6
        else:
            mag = math.ldexp(8 + m, eb - 10)    # (1 + m/8) * 2^(eb-7)
        t[c] = -mag if c & 0x80 else mag
    return t


def _build_e8m0_table() -> np.ndarray:
    t = np.empty(256, dtype=np.float64)
    for c in range(255):
        t[c] = math.ldexp(1.0, c - E8M0_BIAS)
    t[E8M0_NAN] = math.nan
    return t


_E6M2_TABLE = _build_e6m2_table()
_E6M2_RECIP_TABLE = _build_recip_table()
_S1P2_TABLE = _build_s1p2_table()
_E2M1_TABLE = _build_e2m1_table()
_E4M3_TABLE = _build_e4m3_table()
_E8M0_TABLE = _build_e8m0_table()

_E2M1_HALVES = np.array([round(m * 2) for m in E2M1_MAGNITUDES], dtype=np.int64)


# ---------------------------------------------------------------------------
# BF16 rounding

def round_bf16_array(x) -> np.ndarray:
    """Round binary32 values to BF16 under round-to-nearest-even.

    Input is interpreted as binary32 (wider inputs are narrowed first);
    result is returned as float32 holding exact BF16 values.  Sign,
    infinities and NaN are preserved (NaN is canonicalized).
    """
    f = np.array(x, dtype=np.float32, copy=True)
    u = f.view(np.uint32)
    nan = np.isnan(f)
    bias = np.uint32(0x7FFF) + ((u >> np.uint32(16)) & np.uint32(1))
    r = ((u + bias) >> np.uint32(16)) << np.uint32(16)
    r = np.where(nan, (u & np.uint32(0x80000000)) | np.uint32(0x7FC00000), r)
    return r.view(np.float32)


def round_bf16(x: float) -> float:
    """Scalar BF16 rounding; see round_bf16_array."""
    if math.isnan(x):
        return math.nan
    if math.isinf(x) or abs(x) >= _F32_OVERFLOW:
        return math.copysign(math.inf, x)
    return float(round_bf16_array(x)[()])


# ---------------------------------------------------------------------------
# E6M2

def decode_e6m2_array(codes) -> np.ndarray:
    return _E6M2_TABLE[np.asarray(codes, dtype=np.uint8)]


def encode_e6m2_array(x) -> np.ndarray:
    """Encode positive finite reals to E6M2, nearest with ties to even.

    Saturates at both ends: values above 1.5 * 2^15 map to the max finite
    code and values below 2^-48 to the minimum code (E6M2 cannot encode
    zero or infinity).  Callers guarantee positivity and finiteness.
    """
    x = np.asarray(x, dtype=np.float64)
    m, e = np.frexp(x)                 # x = m * 2^e, m in [0.5, 1)
    q = np.rint(m * 8.0).astype(np.int64)   # significand quarters in [4, 8]
    exp = e.astype(np.int64) - 1
    carry = q == 8
    q = np.where(carry, 4, q)
    exp = np.where(carry, exp + 1, exp)
    mant = q - 4
    code = ((exp + E6M2_BIAS) << 2) | mant
    code = np.where(exp < -E6M2_BIAS, 0, code)
    # exponent 15 with mantissa 3 is the NaN pattern, so the largest finite
    # value there is mantissa 2; everything at or above rounds down to it
    over = (exp > 15) | ((exp == 15) & (mant == 3))
    code = np.where(over, E6M2_MAX_CODE, code)
    return code.astype(np.uint8)


def decode_e6m2(code: int) -> float:
    """Decode one E6M2 code; total over all 256 patterns."""
    return float(_E6M2_TABLE[code & 0xFF])


def encode_e6m2(x: float) -> int:
    """Encode one positive finite real to E6M2."""
    if not math.isfinite(x) or x <= 0.0:
        raise ValueError(f"E6M2 can only encode positive finite reals, got {x!r}")
    return int(encode_e6m2_array(x)[()])


def recip_e6m2_array(codes) -> np.ndarray:
    """BF16 reciprocal of E6M2 codes (table-driven, exact binary64 out)."""
    return _E6M2_RECIP_TABLE[np.asarray(codes, dtype=np.uint8)]


def recip_e6m2_to_bf16(code: int) -> float:
    """BF16-rounded reciprocal of an E6M2 value.

    Realized as a 4-entry lookup on the mantissa plus an exponent
    subtraction; agrees bit-for-bit with round_bf16(1 / decode_e6m2(code))
    for every finite code.  NaN code yields NaN.
    """
    return float(_E6M2_RECIP_TABLE[code & 0xFF])


# ---------------------------------------------------------------------------
# S1P2

def decode_s1p2_array(codes) -> np.ndarray:
    return _S1P2_TABLE[np.asarray(codes, dtype=np.uint8) & 0xF]


def encode_s1p2_array(x) -> np.ndarray:
    """Quantize to quarter steps, clamp magnitude to 7, keep the sign."""
    x = np.asarray(x, dtype=np.float64)
    q = np.rint(x * 4.0)
    mag = np.minimum(np.abs(q), 7.0).astype(np.uint8)
    sign = np.signbit(x).astype(np.uint8)
    return (sign << 3) | mag


def decode_s1p2(code: int) -> float:
    return float(_S1P2_TABLE[code & 0xF])


def encode_s1p2(x: float) -> int:
    if math.isnan(x):
        raise ValueError("S1P2 cannot encode NaN; handle NaN at the block level")
    return int(encode_s1p2_array(x)[()])


# ---------------------------------------------------------------------------
# E2M1

def decode_e2m1_array(codes) -> np.ndarray:
    return _E2M1_TABLE[np.asarray(codes, dtype=np.uint8) & 0xF]


def encode_e2m1_array(x) -> np.ndarray:
    """Round to the nearest E2M1 value (ties to even code), saturate at 6.

    The magnitude grid is piecewise uniform -- halves up to 2, integers up
    to 4, then evens -- and np.rint's half-to-even matches the code-parity
    tie rule on each piece.
    """
    x = np.asarray(x, dtype=np.float64)
    a = np.abs(x)
    mag = np.where(
        a <= 2.0,
        np.rint(a * 2.0) / 2.0,
        np.where(a <= 4.0, np.rint(a), np.minimum(np.rint(a / 2.0) * 2.0, 6.0)),
    )
    halves = (mag * 2.0).astype(np.int64)
    code = np.searchsorted(_E2M1_HALVES, halves).astype(np.uint8)
    sign = np.signbit(x).astype(np.uint8)
    return (sign << 3) | code


def decode_e2m1(code: int) -> float:
    return float(_E2M1_TABLE[code & 0xF])


def encode_e2m1(x: float) -> int:
    if math.isnan(x):
        raise ValueError("E2M1 has no NaN encoding")
    return int(encode_e2m1_array(x)[()])


# ---------------------------------------------------------------------------
# E4M3

def decode_e4m3_array(codes) -> np.ndarray:
    return _E4M3_TABLE[np.asarray(codes, dtype=np.uint8)]


def encode_e4m3_array(x) -> np.ndarray:
    """Round to nearest E4M3 (ties to even), saturate at +-448, NaN -> NaN."""
    x = np.asarray(x, dtype=np.float64)
    nan = np.isnan(x)
    a = np.where(nan, 0.0, np.abs(x))
    a = np.where(np.isinf(a), 1e300, a)   # infinities saturate to max finite
    sign = np.signbit(x).astype(np.uint8) << 7

    # subnormal region [0, 2^-6): uniform grid of 2^-9; rounding to q == 8
    # lands exactly on the first normal code, so the arithmetic is seamless
    sub_code = np.rint(np.minimum(a, 1.0) * 512.0).astype(np.int64)

    m, e = np.frexp(np.where(a > 0, a, 1.0))
    q = np.rint(m * 16.0).astype(np.int64)      # significand eighths in [8, 16]
    exp = e.astype(np.int64) - 1
    carry = q == 16
    q = np.where(carry, 8, q)
    exp = np.where(carry, exp + 1, exp)
    mant = q - 8
    biased = exp + E4M3_BIAS
    norm_code = (biased << 3) | mant
    over = (biased > 15) | ((biased == 15) & (mant == 7))
    norm_code = np.where(over, E4M3_MAX_CODE, norm_code)

    code = np.where(a < 2.0 ** -6, sub_code, norm_code).astype(np.uint8)
    code = code | sign
    return np.where(nan, np.uint8(E4M3_NAN), code)


def decode_e4m3(code: int) -> float:
    return float(_E4M3_TABLE[code & 0xFF])


def encode_e4m3(x: float) -> int:
    return int(encode_e4m3_array(x)[()])


# ---------------------------------------------------------------------------
# E8M0

def decode_e8m0_array(codes) -> np.ndarray:
    return _E8M0_TABLE[np.asarray(codes, dtype=np.uint8)]


def decode_e8m0(code: int) -> float:
    return float(_E8M0_TABLE[code & 0xFF])


def e8m0_from_exponent(exp: int) -> int:
    """Code for an exact power of two; exponent must lie in [-127, 127]."""
    if not -E8M0_BIAS <= exp <= 127:
        raise ValueError(f"exponent {exp} outside E8M0 range [-127, 127]")
    return exp + E8M0_BIAS


# ---------------------------------------------------------------------------
# Decode-table dumps (golden files for the `tables` CLI subcommand)

_TABLES = {
    "e6m2": (_E6M2_TABLE, 2),
    "s1p2": (_S1P2_TABLE, 1),
    "e2m1": (_E2M1_TABLE, 1),
    "e4m3": (_E4M3_TABLE, 2),
    "e8m0": (_E8M0_TABLE, 2),
}


def format_table(name: str) -> list[tuple[str, float]]:
    """Full decode table of a format as (code_hex, value) rows."""
    if name == "bf16":
        bits = np.arange(65536, dtype=np.uint32) << 16
        with np.errstate(invalid="ignore"):   # signaling-NaN patterns
            vals = bits.view(np.float32).astype(np.float64)
        return [(f"{c:04x}", float(v)) for c, v in enumerate(vals)]
    try:
        table, width = _TABLES[name]
    except KeyError:
        raise ValueError(f"unknown format {name!r}") from None
    return [(f"{c:0{width}x}", float(v)) for c, v in enumerate(table)]
