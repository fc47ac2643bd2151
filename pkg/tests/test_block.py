"""Block encode/decode conformance, packing, and scaling properties."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bfp4.block import (
    Hif4Block,
    apply_scales,
    decode_hif4,
    decode_hif4_batch,
    encode_hif4,
    encode_hif4_batch,
    pack_hif4,
    pack_hif4_batch,
    peak_reduce,
    unpack_hif4,
    unpack_hif4_batch,
)
from bfp4.codecs import E6M2_NAN, decode_e6m2, recip_e6m2_to_bf16, round_bf16
from bfp4.errors import FormatError, UsageError

ZEROS = [0.0] * 64


def one_hot(value, i=0):
    v = ZEROS.copy()
    v[i] = value
    return v


# ---------------------------------------------------------------------------
# peak_reduce

def test_peak_reduce_all_zero():
    t = peak_reduce(ZEROS)
    assert t.v16 == (0.0,) * 16 and t.v8 == (0.0,) * 8 and t.vmax == 0.0


def test_peak_reduce_single_element():
    t = peak_reduce(one_hot(7.0))
    assert t.v16[0] == 7.0 and t.v16[1:] == (0.0,) * 15
    assert t.v8[0] == 7.0 and t.vmax == 7.0


def test_peak_reduce_negative_ramp():
    t = peak_reduce([-(i + 1) for i in range(64)])
    assert t.v16 == tuple(4.0 * (i + 1) for i in range(16))
    assert t.vmax == 64.0


def test_peak_reduce_errors():
    with pytest.raises(UsageError):
        peak_reduce([1.0] * 63)
    with pytest.raises(ValueError):
        peak_reduce(one_hot(math.nan))


# ---------------------------------------------------------------------------
# encode: worked example, zero, non-finite

def test_encode_worked_example():
    b = encode_hif4(one_hot(7.0))
    assert b.e6m2 == 0b110000_00 and decode_e6m2(b.e6m2) == 1.0
    assert b.e1_8 == (1, 0, 0, 0, 0, 0, 0, 0)
    assert b.e1_16 == (1,) + (0,) * 15
    assert b.elems[0] == 0b0111 and b.elems[1:] == (0,) * 63
    d = decode_hif4(b)
    assert d[0] == 7.0 and (d[1:] == 0).all()


def test_encode_all_zero():
    b = encode_hif4(ZEROS)
    assert b.e6m2 == 0 and b.e1_8 == (0,) * 8
    assert b.e1_16 == (0,) * 16 and b.elems == (0,) * 64
    assert (decode_hif4(b) == 0).all()


def test_encode_nonfinite_inputs_give_nan_block():
    for bad in (math.nan, math.inf, -math.inf):
        b = encode_hif4(one_hot(bad, i=17))
        assert b.is_nan
        assert np.isnan(decode_hif4(b)).all()


def test_encode_wrong_length():
    with pytest.raises(UsageError):
        encode_hif4([1.0] * 65)


# ---------------------------------------------------------------------------
# decode witnesses

def test_decode_max_block():
    b = Hif4Block(0xFE, (1,) * 8, (1,) * 16, (0b0111,) * 64)
    d = decode_hif4(b)
    assert (d == 2**18 * 1.3125).all() and d[0] == 344064.0


def test_decode_min_positive():
    b = Hif4Block(0x00, (0,) * 8, (0,) * 16, (0b0001,) + (0,) * 63)
    d = decode_hif4(b)
    assert d[0] == 2**-50 and (d[1:] == 0).all()


def test_decode_nan_block():
    b = Hif4Block(E6M2_NAN, (0,) * 8, (0,) * 16, (0,) * 64)
    assert np.isnan(decode_hif4(b)).all()


def test_decode_micro_exponent_indexing():
    # a single level-2 bit governs elements 8j..8j+7; level-3 bit elements 4k..4k+3
    base = Hif4Block(0b110000_00, (0,) * 8, (0,) * 16, (0b0100,) * 64)
    d0 = decode_hif4(base)
    assert (d0 == 1.0).all()
    b = Hif4Block(0b110000_00, (0, 1) + (0,) * 6, (0,) * 16, (0b0100,) * 64)
    d = decode_hif4(b)
    assert (d[8:16] == 2.0).all() and (np.delete(d, slice(8, 16)) == 1.0).all()
    b = Hif4Block(0b110000_00, (0,) * 8, (0, 0, 0, 1) + (0,) * 12, (0b0100,) * 64)
    d = decode_hif4(b)
    assert (d[12:16] == 2.0).all() and (np.delete(d, slice(12, 16)) == 1.0).all()


# ---------------------------------------------------------------------------
# exact-peak family

def test_exact_peak_family_roundtrips():
    for e in range(-48, 16):
        for s in (7.0, -7.0):
            v = one_hot(s * 2.0**e, i=e % 64)
            d = decode_hif4(encode_hif4(v))
            assert d[e % 64] == v[e % 64], (e, s)
            assert (np.delete(d, e % 64) == 0).all()


# ---------------------------------------------------------------------------
# properties on random vectors

def _random_vectors(n, seed=9):
    rng = np.random.Generator(np.random.Philox(key=seed))
    scales = np.exp2(rng.uniform(-40, 11, size=(n, 1)))
    return (rng.standard_normal((n, 64)) * scales).astype(np.float32)


def test_range_containment_and_sign():
    x = _random_vectors(2000)
    batch = encode_hif4_batch(x)
    dec = decode_hif4_batch(batch)
    bound = 7.0 * decode_e6m2(0xFE)
    scale = np.array([decode_e6m2(int(c)) for c in batch.e6m2])
    assert (np.abs(dec) <= 7.0 * scale[:, None]).all()
    assert (np.abs(dec) <= bound).all()
    same_sign = (np.signbit(dec) == np.signbit(x)) | (dec == 0)
    assert same_sign.all()


def test_scaled_vector_soundness():
    # whenever normalization avoided the scale clamp, every scaled element
    # entering S1P2 quantization is small, and set level-3 bits really did
    # see a local peak >= 2 before their halving
    x = _random_vectors(800, seed=11)
    for row in x:
        vb = [round_bf16(float(v)) for v in row]
        b = encode_hif4(vb)
        rec = recip_e6m2_to_bf16(b.e6m2)
        scaled = apply_scales(vb, rec, b.e1_8, b.e1_16)
        assert max(abs(s) for s in scaled) < 3.75
        tree = peak_reduce(vb)
        for k in range(16):
            if b.e1_16[k]:
                pre = round_bf16(tree.v16[k] * rec) * 2.0 ** -b.e1_8[k // 2]
                assert pre >= 2.0


def test_batch_matches_scalar_bitwise():
    x = _random_vectors(500, seed=13)
    # splice in degenerate rows
    x[7] = 0.0
    x[11, 3] = np.nan
    x[23, 60] = np.inf
    batch = encode_hif4_batch(x)
    for i in range(len(batch)):
        assert batch.block(i) == encode_hif4([float(v) for v in x[i]]), i
    dec = decode_hif4_batch(batch)
    for i in (0, 7, 11, 23, 99):
        expect = decode_hif4(batch.block(i))
        np.testing.assert_array_equal(dec[i], expect)


# ---------------------------------------------------------------------------
# packing

def test_pack_zero_block():
    b = encode_hif4(ZEROS)
    assert pack_hif4(b) == bytes(36)


def test_pack_nibble_order():
    elems = (0b0111, 0b1001) + (0,) * 62
    b = Hif4Block(0, (0,) * 8, (0,) * 16, elems)
    raw = pack_hif4(b)
    assert raw[4] == 0x97


def test_pack_metadata_bits():
    b = Hif4Block(0xAB, (1, 0, 1, 0, 0, 0, 0, 1), (1,) + (0,) * 14 + (1,), (0,) * 64)
    raw = pack_hif4(b)
    assert raw[0] == 0xAB
    assert raw[1] == 0b10000101
    assert raw[2] == 0x01 and raw[3] == 0x80


def test_unpack_rejects_wrong_length():
    with pytest.raises(FormatError):
        unpack_hif4(bytes(35))


@settings(max_examples=200)
@given(
    st.integers(0, 255),
    st.lists(st.integers(0, 1), min_size=8, max_size=8),
    st.lists(st.integers(0, 1), min_size=16, max_size=16),
    st.lists(st.integers(0, 15), min_size=64, max_size=64),
)
def test_pack_roundtrip_random_blocks(code, e8, e16, elems):
    b = Hif4Block(code, tuple(e8), tuple(e16), tuple(elems))
    assert unpack_hif4(pack_hif4(b)) == b


def test_batch_pack_matches_scalar_pack():
    x = _random_vectors(64, seed=21)
    batch = encode_hif4_batch(x)
    raw = pack_hif4_batch(batch)
    for i in range(len(batch)):
        assert raw[36 * i : 36 * (i + 1)] == pack_hif4(batch.block(i))
    back = unpack_hif4_batch(raw, len(batch))
    for i in range(len(batch)):
        assert back.block(i) == batch.block(i)
    with pytest.raises(FormatError):
        unpack_hif4_batch(raw[:-1], len(batch))


# ---------------------------------------------------------------------------
# saturation extremes (documented precision loss, must not crash)

def test_scale_underflow_saturation():
    d = decode_hif4(encode_hif4(one_hot(2.0**-49)))
    assert d[0] == 2.0**-49   # still exact: elements absorb one binade below the floor
    d = decode_hif4(encode_hif4(one_hot(2.0**-60)))
    assert d[0] == 0.0        # far below the representable floor


def test_scale_overflow_saturation():
    d = decode_hif4(encode_hif4(one_hot(3.0e38)))
    assert d[0] == 344064.0   # clamped to the block's max representable value
