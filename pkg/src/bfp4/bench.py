"""Quantization-error benchmark: Gaussian matrices through each 4-bit
pipeline, MSE against the original, and block-format-normalized ratios.

The sweep draws one 1024x1024 binary32 matrix per noise level sigma =
0.01 * 2^x, pushes the same matrix through all four pipelines (hif4,
nvfp4 direct cast, nvfp4 with per-tensor scaling, mxfp4), and reports
per-level MSEs plus ratios normalized by the hif4 row.  Randomness comes
from a counter-based generator (Philox) feeding a Box-Muller transform,
so reports are bit-reproducible across platforms for a given seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .baselines import (
    MXFP4_GROUP_SIZE,
    NVFP4_GROUP_SIZE,
    decode_mxfp4_batch,
    decode_nvfp4_batch,
    encode_mxfp4_batch,
    encode_nvfp4_batch,
    pts_prescale,
)
from .block import BLOCK_SIZE, decode_hif4_batch, encode_hif4_batch
from .errors import UsageError
from .tensor_io import TensorBuffer

__all__ = [
    "FORMATS",
    "GROUP_SIZES",
    "GaussianSpec",
    "SweepRow",
    "derive_seed",
    "gen_gaussian",
    "mse",
    "quantize_dequantize",
    "run_sweep",
    "sweep_to_csv",
    "mid_range_means",
]

FORMATS = ("hif4", "nvfp4_direct", "nvfp4_pts", "mxfp4")
GROUP_SIZES = {"hif4": BLOCK_SIZE, "nvfp4_direct": NVFP4_GROUP_SIZE,
               "nvfp4_pts": NVFP4_GROUP_SIZE, "mxfp4": MXFP4_GROUP_SIZE}

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# stable region of the sweep used for the headline ratio means
MID_RANGE = range(4, 13)


@dataclass(frozen=True)
class GaussianSpec:
    rows: int
    cols: int
    sigma: float
    seed: int


@dataclass(frozen=True)
class SweepRow:
    x: int
    sigma: float
    mse_hif4: float
    mse_nvfp4: float
    mse_nvfp4_pts: float
    mse_mxfp4: float
    ratio_nvfp4: float
    ratio_nvfp4_pts: float
    ratio_mxfp4: float

    @property
    def ratio_hif4(self) -> float:
        return self.mse_hif4 / self.mse_hif4


def _splitmix64(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, index: int) -> int:
    """Index-th output of the splitmix64 stream seeded at `seed`."""
    return _splitmix64((seed + (index + 1) * _GOLDEN) & _MASK64)


def gen_gaussian(spec: GaussianSpec) -> TensorBuffer:
    """Draw a rows x cols binary32 sample of N(0, sigma^2).

    Philox(key=seed) supplies raw 64-bit words; each pair of words becomes
    a uniform pair fed to the basic Box-Muller transform, cos output first.
    Bit-reproducible for a given seed.
    """
    if spec.rows <= 0 or spec.cols <= 0:
        raise UsageError("matrix dimensions must be positive")
    if not spec.sigma > 0:
        raise UsageError("sigma must be positive")
    n = spec.rows * spec.cols
    pairs = (n + 1) // 2
    raw = np.random.Philox(key=spec.seed & _MASK64).random_raw(2 * pairs)
    u1 = ((raw[:pairs] >> 11) + 1) * 2.0 ** -53   # (0, 1]: keeps log finite
    u2 = (raw[pairs:] >> 11) * 2.0 ** -53         # [0, 1)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = (2.0 * np.pi) * u2
    z = np.empty(2 * pairs, dtype=np.float64)
    z[0::2] = r * np.cos(theta)
    z[1::2] = r * np.sin(theta)
    data = (z[:n] * spec.sigma).astype(np.float32)
    return TensorBuffer((spec.rows, spec.cols), "binary32", data)


def mse(original: TensorBuffer, reconstructed: TensorBuffer) -> float:
    """Mean squared error in binary64 with a fixed reduction order:
    sequentially along each row, then sequentially over row sums."""
    if original.dims != reconstructed.dims:
        raise UsageError(f"shape mismatch: {original.dims} vs {reconstructed.dims}")
    a = original.as_f64().reshape(-1, original.dims[-1])
    b = reconstructed.as_f64().reshape(-1, original.dims[-1])
    sq = (a - b) ** 2
    row_sums = np.cumsum(sq, axis=1)[:, -1]   # cumsum forces sequential order
    total = np.cumsum(row_sums)[-1]
    return float(total) / a.size


def _grouped(data: np.ndarray, gs: int) -> tuple[np.ndarray, int]:
    """Flat row-major grouping with a zero-padded tail group."""
    n = data.size
    pad = (-n) % gs
    if pad:
        data = np.concatenate([data, np.zeros(pad, dtype=data.dtype)])
    return data.reshape(-1, gs), n


def quantize_dequantize(t: TensorBuffer, fmt: str) -> TensorBuffer:
    """Round-trip a tensor through one 4-bit pipeline.

    Groups are contiguous in flat row-major index order; a partial tail
    group is zero-padded for encoding and the padding is dropped again, so
    it never contributes to any error measure.
    """
    if fmt not in FORMATS:
        raise UsageError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    x = t.as_f32().ravel()

    factor = None
    if fmt == "nvfp4_pts":
        x, factor = pts_prescale(x)

    groups, n = _grouped(x, GROUP_SIZES[fmt])
    if fmt == "hif4":
        recon = decode_hif4_batch(encode_hif4_batch(groups))
    elif fmt == "mxfp4":
        recon = decode_mxfp4_batch(encode_mxfp4_batch(groups))
    else:
        recon = decode_nvfp4_batch(encode_nvfp4_batch(groups))

    out = recon.astype(np.float32).ravel()[:n]   # decoded values are binary32-exact
    if factor is not None:
        out = out / np.float32(factor)           # the one extra binary32 rounding
    return TensorBuffer(t.dims, "binary32", out)


def run_sweep(seed: int, x_lo: int, x_hi: int,
              rows: int = 1024, cols: int = 1024) -> list[SweepRow]:
    """One matrix per x in [x_lo, x_hi], all four pipelines on that matrix."""
    if x_lo > x_hi:
        raise UsageError("x_lo must not exceed x_hi")
    out = []
    for x in range(x_lo, x_hi + 1):
        sigma = 0.01 * 2.0 ** x
        t = gen_gaussian(GaussianSpec(rows, cols, sigma, derive_seed(seed, x)))
        errs = {fmt: mse(t, quantize_dequantize(t, fmt)) for fmt in FORMATS}
        base = errs["hif4"]
        out.append(SweepRow(
            x=x,
            sigma=sigma,
            mse_hif4=base,
            mse_nvfp4=errs["nvfp4_direct"],
            mse_nvfp4_pts=errs["nvfp4_pts"],
            mse_mxfp4=errs["mxfp4"],
            ratio_nvfp4=errs["nvfp4_direct"] / base,
            ratio_nvfp4_pts=errs["nvfp4_pts"] / base,
            ratio_mxfp4=errs["mxfp4"] / base,
        ))
    return out


def mid_range_means(rows: list[SweepRow]) -> dict[str, float]:
    """Ratio means over the stable region x in [4, 12] (those rows present)."""
    sel = [r for r in rows if r.x in MID_RANGE]
    if not sel:
        sel = rows
    return {
        "nvfp4": math.fsum(r.ratio_nvfp4 for r in sel) / len(sel),
        "nvfp4_pts": math.fsum(r.ratio_nvfp4_pts for r in sel) / len(sel),
        "mxfp4": math.fsum(r.ratio_mxfp4 for r in sel) / len(sel),
    }


def sweep_to_csv(rows: list[SweepRow], seed: int, matrix_rows: int,
                 matrix_cols: int) -> str:
    """Render a sweep as CSV with the seed echoed and ratio-mean footers."""
    lines = [
        f"# seed={seed} rows={matrix_rows} cols={matrix_cols}",
        "x,sigma,mse_hif4,mse_nvfp4,mse_nvfp4_pts,mse_mxfp4,"
        "ratio_nvfp4,ratio_nvfp4_pts,ratio_mxfp4",
    ]
    for r in rows:
        vals = (r.sigma, r.mse_hif4, r.mse_nvfp4, r.mse_nvfp4_pts, r.mse_mxfp4,
                r.ratio_nvfp4, r.ratio_nvfp4_pts, r.ratio_mxfp4)
        lines.append(f"{r.x}," + ",".join(f"{v:.17g}" for v in vals))
    means = mid_range_means(rows)
    lines.append(f"# mean_ratio_nvfp4={means['nvfp4']:.17g}")
    lines.append(f"# mean_ratio_nvfp4_pts={means['nvfp4_pts']:.17g}")
    lines.append(f"# mean_ratio_mxfp4={means['mxfp4']:.17g}")
    return "\n".join(lines) + "\n"
