"""NVFP4 and MXFP4 group codec conformance."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bfp4.baselines import (
    Mxfp4Group,
    Nvfp4Group,
    decode_mxfp4_batch,
    decode_mxfp4_group,
    decode_nvfp4_batch,
    decode_nvfp4_group,
    encode_mxfp4_batch,
    encode_mxfp4_group,
    encode_nvfp4_batch,
    encode_nvfp4_group,
    pts_prescale,
)
from bfp4.codecs import decode_e4m3, decode_e8m0
from bfp4.errors import UsageError


def group16(*head):
    return list(head) + [0.0] * (16 - len(head))


def group32(*head):
    return list(head) + [0.0] * (32 - len(head))


# ---------------------------------------------------------------------------
# NVFP4

def test_nvfp4_unit_scale_group():
    g = encode_nvfp4_group(group16(6.0))
    assert decode_e4m3(g.scale) == 1.0
    assert g.elems[0] == 0b0111          # value 6
    np.testing.assert_array_equal(decode_nvfp4_group(g), group16(6.0))


def test_nvfp4_peak_2688():
    g = encode_nvfp4_group(group16(2688.0))
    assert decode_e4m3(g.scale) == 448.0
    d = decode_nvfp4_group(g)
    assert d[0] == 2688.0 == 2**11 * 1.3125


def test_nvfp4_unit_value_group():
    g = encode_nvfp4_group(group16(1.0))
    assert decode_e4m3(g.scale) == 0.171875
    assert decode_nvfp4_group(g)[0] == 0.171875 * 6 == 1.03125


def test_nvfp4_direct_cast_overflow_is_kept():
    # group peaks beyond 2688 clip; this fluctuation is part of the format
    g = encode_nvfp4_group(group16(13440.0))
    assert decode_nvfp4_group(g)[0] == 2688.0


def test_nvfp4_zero_group_uses_min_subnormal_scale():
    g = encode_nvfp4_group([0.0] * 16)
    assert decode_e4m3(g.scale) == 2**-9
    assert (decode_nvfp4_group(g) == 0).all()


def test_nvfp4_tiny_peak_elements_underflow():
    g = encode_nvfp4_group(group16(2**-14))
    assert decode_e4m3(g.scale) == 2**-9
    assert (decode_nvfp4_group(g) == 0).all()


def test_nvfp4_range_scan_exhaustive():
    # every well-formed scale code x every element magnitude
    scales = np.array([decode_e4m3(c) for c in range(0x01, 0x7F)])
    elem_mags = np.array([0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0])
    products = scales[:, None] * elem_mags[None, :]
    assert products.max() == 2688.0
    assert products.min() == 2**-10
    assert (np.abs(products) <= 448 * 6).all()


def test_nvfp4_peak_normalization_invariant():
    rng = np.random.Generator(np.random.Philox(key=5))
    x = rng.normal(scale=40.0, size=(500, 16))
    batch = encode_nvfp4_batch(x)
    dec = decode_nvfp4_batch(batch)
    scale = np.array([decode_e4m3(int(c)) for c in batch.scales])
    assert (np.abs(dec) <= 6.0 * scale[:, None]).all()


def test_nvfp4_errors():
    with pytest.raises(UsageError):
        encode_nvfp4_group([1.0] * 15)
    with pytest.raises(ValueError):
        encode_nvfp4_group(group16(math.nan))
    with pytest.raises(ValueError):
        Nvfp4Group(0x7F, (0,) * 16)   # NaN scale never well-formed


def test_nvfp4_tensor_wrapper():
    rng = np.random.Generator(np.random.Philox(key=14))
    x = rng.normal(scale=500.0, size=(3, 16)).astype(np.float32)
    scaled, f = pts_prescale(x)
    from bfp4.baselines import Nvfp4Tensor
    t = Nvfp4Tensor(encode_nvfp4_batch(scaled), dims=(3, 16), pts_factor=f)
    assert len(t.groups) == 3
    assert all(isinstance(g, Nvfp4Group) for g in t.groups)
    with pytest.raises(ValueError):
        Nvfp4Tensor(t.batch, dims=(3, 16), pts_factor=0.0)


def test_nvfp4_batch_matches_scalar():
    rng = np.random.Generator(np.random.Philox(key=6))
    x = rng.normal(scale=300.0, size=(200, 16))
    x[0] = 0.0
    batch = encode_nvfp4_batch(x)
    for i in range(len(batch)):
        assert batch.group(i) == encode_nvfp4_group(list(x[i])), i


# ---------------------------------------------------------------------------
# PTS

def test_pts_examples():
    _, f = pts_prescale(np.array([2688.0], dtype=np.float32))
    assert f == 1.0
    _, f = pts_prescale(np.array([-13440.0, 1.0], dtype=np.float32))
    assert f == np.float32(0.2)
    _, f = pts_prescale(np.array([0.01], dtype=np.float32))
    assert f == 268800.0


def test_pts_zero_tensor_is_noop():
    x = np.zeros(8, dtype=np.float32)
    scaled, f = pts_prescale(x)
    assert f == 1.0 and (scaled == 0).all()


def test_pts_scales_peak_to_target():
    rng = np.random.Generator(np.random.Philox(key=8))
    x = rng.normal(scale=3.0, size=256).astype(np.float32)
    scaled, f = pts_prescale(x)
    assert np.float32(f) == np.float32(2688.0) / np.float32(np.abs(x).max())
    np.testing.assert_array_equal(scaled, x * np.float32(f))


def test_pts_roundtrip_single_extra_rounding():
    # dequantize(quantize_with_pts(t)) == decode(encode(t * f)) / f in binary32
    rng = np.random.Generator(np.random.Philox(key=12))
    x = rng.normal(scale=7000.0, size=(64, 16)).astype(np.float32)
    flat = x.ravel()
    scaled, f = pts_prescale(flat)
    dec = decode_nvfp4_batch(encode_nvfp4_batch(scaled.reshape(-1, 16)))
    manual = dec.astype(np.float32).ravel() / np.float32(f)
    from bfp4.bench import quantize_dequantize
    from bfp4.tensor_io import TensorBuffer
    out = quantize_dequantize(TensorBuffer((64, 16), "binary32", flat), "nvfp4_pts")
    np.testing.assert_array_equal(out.data, manual)


# ---------------------------------------------------------------------------
# MXFP4

def test_mxfp4_peak_4():
    g = encode_mxfp4_group(group32(4.0))
    assert decode_e8m0(g.scale) == 1.0
    np.testing.assert_array_equal(decode_mxfp4_group(g), group32(4.0))


def test_mxfp4_peak_7_saturates():
    g = encode_mxfp4_group(group32(7.0))
    assert decode_e8m0(g.scale) == 1.0
    assert decode_mxfp4_group(g)[0] == 6.0


def test_mxfp4_zero_group():
    g = encode_mxfp4_group([0.0] * 32)
    assert g.scale == 0 and decode_e8m0(g.scale) == 2.0**-127
    assert (decode_mxfp4_group(g) == 0).all()


def test_mxfp4_scale_is_power_of_two_and_shared():
    rng = np.random.Generator(np.random.Philox(key=31))
    x = rng.normal(scale=50.0, size=(300, 32))
    batch = encode_mxfp4_batch(x)
    for i in range(len(batch)):
        s = decode_e8m0(int(batch.scales[i]))
        m, _ = math.frexp(s)
        assert m == 0.5                       # exact power of two
        dec = decode_mxfp4_batch(batch)[i]
        elems = np.array([0.0, 0.5, 1, 1.5, 2, 3, 4, 6])
        mags = elems[np.asarray(batch.elems[i]) & 7]
        np.testing.assert_array_equal(np.abs(dec), mags * s)


def test_mxfp4_floor_log2_rule():
    for peak, want_exp in ((4.0, 0), (7.0, 0), (8.0, 1), (1.0, -2), (0.9, -3)):
        g = encode_mxfp4_group(group32(peak))
        assert decode_e8m0(g.scale) == 2.0**want_exp, peak


def test_mxfp4_errors():
    with pytest.raises(UsageError):
        encode_mxfp4_group([1.0] * 31)
    with pytest.raises(ValueError):
        encode_mxfp4_group(group32(math.nan))
    with pytest.raises(ValueError):
        Mxfp4Group(0xFF, (0,) * 32)


def test_mxfp4_batch_matches_scalar():
    rng = np.random.Generator(np.random.Philox(key=33))
    x = rng.normal(scale=1e-3, size=(200, 32))
    x[0] = 0.0
    batch = encode_mxfp4_batch(x)
    for i in range(len(batch)):
        assert batch.group(i) == encode_mxfp4_group(list(x[i])), i


@given(st.floats(min_value=-100, max_value=100), st.integers(0, 31))
def test_mxfp4_roundtrip_error_bounded(v, pos):
    if v != 0 and abs(v) < 2.0**-120:
        return   # below the E8M0 clamp floor the bound genuinely breaks
    vals = [0.0] * 32
    vals[pos] = v
    dec = decode_mxfp4_group(encode_mxfp4_group(vals))[pos]
    # one element alone is its own peak: relative error at most an E2M1
    # quarter-step of the top binade
    if v != 0:
        assert abs(dec - v) <= abs(v) * 0.25
