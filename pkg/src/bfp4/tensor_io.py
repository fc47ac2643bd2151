"""Binary tensor files and quantized containers.

Tensor file ("BFPT"), all integers little-endian:

    offset  size  field
    0       4     magic "BFPT"
    4       2     version, u16 = 1
    6       1     dtype: 0 = binary32, 1 = bf16
    7       1     reserved = 0
    8       4     ndim, u32
    12      8*n   dims, u64 each
    ...           payload: binary32 values or bf16 bit patterns (u16)

Quantized container, one magic per element format with a flags word
(bit 0: a per-tensor pre-scale factor follows the dims):

    offset  size  field
    0       4     magic "HIF4" | "NVF4" | "MXF4"
    4       2     version, u16 = 1
    6       2     flags, u16
    8       4     ndim, u32
    12      8*n   dims, u64 each
    ...     4     pts_factor, binary32 (present iff flags bit 0)
    ...           packed groups, ceil(total / group_size) of them

Group payloads: 36 bytes per 64-element block (see block.pack_hif4);
9 bytes per NVFP4 group (scale byte, then 16 element nibbles, low nibble
first); 17 bytes per MXFP4 group (scale byte, then 32 nibbles).  Groups
cover the flattened row-major tensor; the tail group is zero-padded and
the decoder truncates it back to the element count implied by dims.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .baselines import (
    MXFP4_GROUP_SIZE,
    NVFP4_GROUP_SIZE,
    Mxfp4GroupBatch,
    Nvfp4GroupBatch,
    decode_mxfp4_batch,
    decode_nvfp4_batch,
    encode_mxfp4_batch,
    encode_nvfp4_batch,
    pts_prescale,
)
from .block import (
    BLOCK_SIZE,
    Hif4BlockBatch,
    decode_hif4_batch,
    encode_hif4_batch,
    pack_hif4_batch,
    unpack_hif4_batch,
)
from .errors import FormatError, UsageError

__all__ = [
    "TensorBuffer",
    "QuantContainer",
    "read_tensor",
    "write_tensor",
    "quantize_tensor",
    "dequantize_container",
    "read_container",
    "write_container",
]

_TENSOR_MAGIC = b"BFPT"
_TENSOR_VERSION = 1
_DTYPE_CODES = {"binary32": 0, "bf16": 1}
_DTYPE_NAMES = {v: k for k, v in _DTYPE_CODES.items()}

_CONTAINER_MAGIC = {"hif4": b"HIF4", "nvfp4": b"NVF4", "mxfp4": b"MXF4"}
_CONTAINER_FORMAT = {v: k for k, v in _CONTAINER_MAGIC.items()}
_CONTAINER_VERSION = 1
_FLAG_PTS = 1


@dataclass
class TensorBuffer:
    """A dense row-major tensor: binary32 values or raw bf16 bit patterns."""

    dims: tuple[int, ...]
    dtype: str
    data: np.ndarray   # flat; float32 for binary32, uint16 for bf16

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if not self.dims or any(d <= 0 for d in self.dims):
            raise UsageError(f"dims must be positive, got {self.dims}")
        if self.dtype not in _DTYPE_CODES:
            raise UsageError(f"dtype must be binary32 or bf16, got {self.dtype!r}")
        want = np.float32 if self.dtype == "binary32" else np.uint16
        self.data = np.ascontiguousarray(self.data, dtype=want).ravel()
        n = int(np.prod(self.dims))
        if self.data.size != n:
            raise UsageError(f"payload holds {self.data.size} elements, dims need {n}")

    @property
    def size(self) -> int:
        return self.data.size

    def as_f32(self) -> np.ndarray:
        if self.dtype == "binary32":
            return self.data.reshape(self.dims)
        bits = self.data.astype(np.uint32) << 16
        return bits.view(np.float32).reshape(self.dims)

    def as_f64(self) -> np.ndarray:
        return self.as_f32().astype(np.float64)


def write_tensor(path, t: TensorBuffer) -> None:
    with open(path, "wb") as f:
        f.write(_TENSOR_MAGIC)
        f.write(_TENSOR_VERSION.to_bytes(2, "little"))
        f.write(bytes([_DTYPE_CODES[t.dtype], 0]))
        f.write(len(t.dims).to_bytes(4, "little"))
        for d in t.dims:
            f.write(int(d).to_bytes(8, "little"))
        payload = t.data.astype("<f4" if t.dtype == "binary32" else "<u2")
        f.write(payload.tobytes())


def _take(buf: bytes, off: int, n: int, what: str) -> tuple[bytes, int]:
    if off + n > len(buf):
        raise FormatError(
            f"truncated while reading {what} at byte {off}: "
            f"need {n} bytes, have {len(buf) - off}"
        )
    return buf[off : off + n], off + n


def _read_dims(buf: bytes, off: int) -> tuple[tuple[int, ...], int]:
    raw, off = _take(buf, off, 4, "ndim")
    ndim = int.from_bytes(raw, "little")
    dims = []
    for i in range(ndim):
        raw, off = _take(buf, off, 8, f"dims[{i}]")
        dims.append(int.from_bytes(raw, "little"))
    if not dims or any(d <= 0 for d in dims):
        raise FormatError(f"dims must be positive, got {tuple(dims)}")
    return tuple(dims), off


def read_tensor(path) -> TensorBuffer:
    with open(path, "rb") as f:
        buf = f.read()
    raw, off = _take(buf, 0, 4, "magic")
    if raw != _TENSOR_MAGIC:
        raise FormatError(f"bad magic {raw!r} at byte 0, expected {_TENSOR_MAGIC!r}")
    raw, off = _take(buf, off, 2, "version")
    version = int.from_bytes(raw, "little")
    if version != _TENSOR_VERSION:
        raise FormatError(f"unsupported tensor version {version} at byte 4")
    raw, off = _take(buf, off, 2, "dtype")
    if raw[0] not in _DTYPE_NAMES:
        raise FormatError(f"unknown dtype code {raw[0]} at byte 6")
    dtype = _DTYPE_NAMES[raw[0]]
    dims, off = _read_dims(buf, off)
    n = int(np.prod(dims))
    unit = 4 if dtype == "binary32" else 2
    if len(buf) - off != n * unit:
        raise FormatError(
            f"payload at byte {off}: expected {n * unit} bytes, got {len(buf) - off}"
        )
    raw = np.frombuffer(buf, dtype="<f4" if dtype == "binary32" else "<u2", offset=off)
    return TensorBuffer(dims, dtype, raw.copy())


# ---------------------------------------------------------------------------
# Quantized containers

@dataclass(eq=False)
class QuantContainer:
    fmt: str                       # hif4 | nvfp4 | mxfp4
    dims: tuple[int, ...]
    pts_factor: float | None       # present iff the PTS flag is set
    payload: object                # Hif4BlockBatch | Nvfp4GroupBatch | Mxfp4GroupBatch

    @property
    def group_size(self) -> int:
        return {"hif4": BLOCK_SIZE, "nvfp4": NVFP4_GROUP_SIZE,
                "mxfp4": MXFP4_GROUP_SIZE}[self.fmt]

    def equals(self, other: "QuantContainer") -> bool:
        if (self.fmt, self.dims, self.pts_factor) != (other.fmt, other.dims,
                                                      other.pts_factor):
            return False
        a, b = self.payload, other.payload
        if isinstance(a, Hif4BlockBatch):
            return (np.array_equal(a.e6m2, b.e6m2) and np.array_equal(a.e1_8, b.e1_8)
                    and np.array_equal(a.e1_16, b.e1_16)
                    and np.array_equal(a.elems, b.elems))
        return np.array_equal(a.scales, b.scales) and np.array_equal(a.elems, b.elems)


def quantize_tensor(t: TensorBuffer, fmt: str, pts: bool = False) -> QuantContainer:
    """Quantize a tensor into a container; matches bench.quantize_dequantize."""
    if fmt not in _CONTAINER_MAGIC:
        raise UsageError(f"unknown format {fmt!r}")
    if pts and fmt != "nvfp4":
        raise UsageError("--pts applies to nvfp4 only")
    x = t.as_f32().ravel()
    factor = None
    if pts:
        x, factor = pts_prescale(x)
    gs = {"hif4": BLOCK_SIZE, "nvfp4": NVFP4_GROUP_SIZE, "mxfp4": MXFP4_GROUP_SIZE}[fmt]
    pad = (-x.size) % gs
    if pad:
        x = np.concatenate([x, np.zeros(pad, dtype=np.float32)])
    groups = x.reshape(-1, gs)
    if fmt == "hif4":
        payload = encode_hif4_batch(groups)
    elif fmt == "nvfp4":
        payload = encode_nvfp4_batch(groups)
    else:
        payload = encode_mxfp4_batch(groups)
    return QuantContainer(fmt, t.dims, factor, payload)


def dequantize_container(c: QuantContainer) -> TensorBuffer:
    """Decode a container to a binary32 tensor, dropping tail padding."""
    if c.fmt == "hif4":
        vals = decode_hif4_batch(c.payload)
    elif c.fmt == "nvfp4":
        vals = decode_nvfp4_batch(c.payload)
    else:
        vals = decode_mxfp4_batch(c.payload)
    n = int(np.prod(c.dims))
    out = vals.astype(np.float32).ravel()[:n]
    if c.pts_factor is not None:
        out = out / np.float32(c.pts_factor)
    return TensorBuffer(c.dims, "binary32", out)


def _pack_nibbles(elems: np.ndarray) -> np.ndarray:
    return (elems[:, 0::2] | (elems[:, 1::2] << 4)).astype(np.uint8)


def _unpack_nibbles(raw: np.ndarray) -> np.ndarray:
    n, half = raw.shape
    out = np.empty((n, 2 * half), dtype=np.uint8)
    out[:, 0::2] = raw & 0xF
    out[:, 1::2] = raw >> 4
    return out


def write_container(path, c: QuantContainer) -> None:
    with open(path, "wb") as f:
        f.write(_CONTAINER_MAGIC[c.fmt])
        f.write(_CONTAINER_VERSION.to_bytes(2, "little"))
        f.write((_FLAG_PTS if c.pts_factor is not None else 0).to_bytes(2, "little"))
        f.write(len(c.dims).to_bytes(4, "little"))
        for d in c.dims:
            f.write(int(d).to_bytes(8, "little"))
        if c.pts_factor is not None:
            f.write(np.float32(c.pts_factor).tobytes())
        if c.fmt == "hif4":
            f.write(pack_hif4_batch(c.payload))
        else:
            p = c.payload
            n = len(p)
            body = np.empty((n, 1 + p.elems.shape[1] // 2), dtype=np.uint8)
            body[:, 0] = p.scales
            body[:, 1:] = _pack_nibbles(p.elems)
            f.write(body.tobytes())


def read_container(path) -> QuantContainer:
    with open(path, "rb") as f:
        buf = f.read()
    raw, off = _take(buf, 0, 4, "magic")
    if raw not in _CONTAINER_FORMAT:
        raise FormatError(f"bad container magic {raw!r} at byte 0")
    fmt = _CONTAINER_FORMAT[raw]
    raw, off = _take(buf, off, 2, "version")
    version = int.from_bytes(raw, "little")
    if version != _CONTAINER_VERSION:
        raise FormatError(f"unsupported container version {version} at byte 4")
    raw, off = _take(buf, off, 2, "flags")
    flags = int.from_bytes(raw, "little")
    dims, off = _read_dims(buf, off)
    factor = None
    if flags & _FLAG_PTS:
        if fmt != "nvfp4":
            raise FormatError("PTS flag is only valid for NVF4 containers")
        raw, off = _take(buf, off, 4, "pts_factor")
        factor = float(np.frombuffer(raw, dtype="<f4")[0])

    gs = {"hif4": BLOCK_SIZE, "nvfp4": NVFP4_GROUP_SIZE, "mxfp4": MXFP4_GROUP_SIZE}[fmt]
    n_groups = -(-int(np.prod(dims)) // gs)
    unit = {"hif4": 36, "nvfp4": 9, "mxfp4": 17}[fmt]
    body = buf[off:]
    if len(body) != n_groups * unit:
        raise FormatError(
            f"group payload at byte {off}: expected {n_groups * unit} bytes, "
            f"got {len(body)}"
        )
    if fmt == "hif4":
        payload = unpack_hif4_batch(body, n_groups)
    else:
        raw2 = np.frombuffer(body, dtype=np.uint8).reshape(n_groups, unit)
        elems = _unpack_nibbles(raw2[:, 1:])
        cls = Nvfp4GroupBatch if fmt == "nvfp4" else Mxfp4GroupBatch
        payload = cls(raw2[:, 0].copy(), elems)
    return QuantContainer(fmt, dims, factor, payload)
