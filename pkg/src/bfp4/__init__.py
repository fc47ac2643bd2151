"""4-bit block floating-point toolkit.

Bit-exact codecs for a 64-element hierarchical block format and its
NVFP4/MXFP4 baselines, fixed-point dot-product emulation with stage
traces, a deterministic Gaussian quantization-error benchmark, and
binary tensor/container file formats with a CLI on top.
"""

from .baselines import (
    Mxfp4Group,
    Nvfp4Group,
    Nvfp4Tensor,
    decode_mxfp4_group,
    decode_nvfp4_group,
    encode_mxfp4_group,
    encode_nvfp4_group,
    pts_prescale,
)
from .bench import (
    GaussianSpec,
    SweepRow,
    gen_gaussian,
    mse,
    quantize_dequantize,
    run_sweep,
)
from .block import (
    Hif4Block,
    PeakTree,
    decode_hif4,
    encode_hif4,
    pack_hif4,
    peak_reduce,
    unpack_hif4,
)
from .codecs import (
    decode_e2m1,
    decode_e4m3,
    decode_e6m2,
    decode_e8m0,
    decode_s1p2,
    encode_e2m1,
    encode_e4m3,
    encode_e6m2,
    encode_s1p2,
    recip_e6m2_to_bf16,
    round_bf16,
)
from .dot import DotTrace, FixedPointValue, dot_hif4_fixed, dot_nvfp4_fixed, dot_reference
from .errors import FormatError, InvariantViolation, UsageError
from .tensor_io import QuantContainer, TensorBuffer, read_tensor, write_tensor

__version__ = "0.1.0"
