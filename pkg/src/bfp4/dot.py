"""64-length dot products: binary64 reference flow and the fixed-point
datapath emulations, with per-stage traces.

For two 64-element blocks the fixed-point flow absorbs each level-3
micro-exponent into its S1P2 element (a left shift, giving a 5-bit S2P2
operand), multiplies the 64 operand pairs exactly, shifts each product by
the two level-2 bits of its run, and reduces everything to a single signed
integer accumulator in units of 1/16.  One small scale multiply
(E6M2 x E6M2) and one wide integer-by-scale multiply then produce the
result.  The value bound |sum| <= 3136 (= 64 * 3.5 * 3.5 * 4) keeps the
accumulator inside 12 integer bits, which is asserted on every call.

The 16-element-group baseline runs the same idea per group: E2M1 elements
become 5-bit S3P1 operands (halves), each group reduces to an integer
partial bounded by 576 (10 integer bits), and each partial is scaled by
its own E4M3 x E4M3 product before a final 4-term binary64 accumulation.
That needs 4 small and 4 wide multipliers per 64-length dot against 1 + 1
for the large-block flow.

Everything upstream of the final floating-point steps is exact integer
arithmetic, and the floating-point steps operate on values whose
significands are far below 53 bits, so the fixed-point results equal the
binary64 reference bit-for-bit.  `run_dot_check` verifies this over
batches of random operands (plus the adversarial all-max pair) and
reports the widest accumulator seen.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .baselines import NVFP4_GROUP_SIZE, Nvfp4Group
from .block import BLOCK_SIZE, Hif4Block, decode_hif4
from .codecs import (
    decode_e2m1_array,
    decode_e4m3,
    decode_e4m3_array,
    decode_e6m2,
    decode_e6m2_array,
    decode_s1p2_array,
)
from .errors import InvariantViolation, UsageError

__all__ = [
    "HIF4_ACC_BOUND",
    "NVFP4_PARTIAL_BOUND",
    "FixedPointValue",
    "DotTrace",
    "DotCheckResult",
    "dot_reference",
    "dot_hif4_fixed",
    "dot_nvfp4_reference",
    "dot_nvfp4_fixed",
    "run_dot_check",
]

# Accumulator bounds in value units (not fixed-point units)
HIF4_ACC_BOUND = 3136    # 64 * (3.5 * 3.5 * 4), inside S12P4's 12 integer bits
NVFP4_PARTIAL_BOUND = 576   # 16 * 6 * 6, inside S10P2's 10 integer bits

# format tag -> (integer bits, fraction bits); magnitude < 2^int_bits
_FIXED_FORMATS = {
    "S2P2": (2, 2),
    "S3P1": (3, 1),
    "S4P4": (4, 4),
    "S6P4": (6, 4),
    "S10P2": (10, 2),
    "S12P4": (12, 4),
}


@dataclass(frozen=True)
class FixedPointValue:
    """A signed fixed-point quantity: value = q / 2^frac_bits."""

    q: int
    frac_bits: int
    format_tag: str

    def __post_init__(self):
        try:
            int_bits, frac = _FIXED_FORMATS[self.format_tag]
        except KeyError:
            raise ValueError(f"unknown fixed-point format {self.format_tag!r}") from None
        if frac != self.frac_bits:
            raise ValueError(f"{self.format_tag} carries {frac} fraction bits")
        if abs(self.q) >= 1 << (int_bits + frac):
            raise InvariantViolation(
                f"{self.format_tag} overflow: |{self.q}| >= 2^{int_bits + frac}"
            )

    @property
    def value(self) -> float:
        return self.q / (1 << self.frac_bits)


@dataclass
class DotTrace:
    """Per-stage record of one fixed-point dot product.

    `replay()` recomputes the result from the absorbed operands and shift
    amounts alone, which pins down that the trace is complete.
    """

    fmt: str
    absorbed_a: list[FixedPointValue]
    absorbed_b: list[FixedPointValue]
    products: list[int]          # exact signed integer products
    shifts: list[int]            # per-product left shift from level-2 bits
    partial_sums: list[int]      # running integer sums (per group for nvfp4)
    accumulators: list[FixedPointValue]   # one S12P4 / four S10P2
    scale_products: list[float]  # one E6M2*E6M2 / four E4M3*E4M3
    scale_multipliers: int
    wide_multipliers: int
    result: float = field(default=0.0)

    def replay(self) -> float:
        if self.fmt == "hif4":
            acc = sum(
                (a.q * b.q) << s
                for a, b, s in zip(self.absorbed_a, self.absorbed_b, self.shifts)
            )
            return acc / 16.0 * self.scale_products[0]
        total = 0.0
        for g, sp in enumerate(self.scale_products):
            lo = g * NVFP4_GROUP_SIZE
            part = sum(
                a.q * b.q
                for a, b in zip(self.absorbed_a[lo : lo + NVFP4_GROUP_SIZE],
                                self.absorbed_b[lo : lo + NVFP4_GROUP_SIZE])
            )
            total += part / 4.0 * sp
        return total


def dot_reference(a: Hif4Block, b: Hif4Block) -> float:
    """Binary64 dot of the decoded blocks, accumulated in index order.

    Every partial product and partial sum fits a binary64 exactly, so this
    is the exact real value; NaN if either scale is NaN.
    """
    da = decode_hif4(a)
    db = decode_hif4(b)
    acc = 0.0
    for i in range(BLOCK_SIZE):
        acc += da[i] * db[i]
    return acc


def dot_hif4_fixed(a: Hif4Block, b: Hif4Block) -> tuple[float, DotTrace]:
    """Fixed-point 64-length dot; equals dot_reference bit-for-bit."""
    if a.is_nan or b.is_nan:
        raise ValueError("fixed-point dot is defined for finite blocks only; "
                         "use dot_reference for NaN semantics")

    def absorb(blk: Hif4Block) -> list[FixedPointValue]:
        out = []
        for i, code in enumerate(blk.elems):
            mag = (code & 7) << blk.e1_16[i // 4]
            q = -mag if code & 8 else mag
            out.append(FixedPointValue(q, 2, "S2P2"))   # |q| <= 14
        return out

    qa = absorb(a)
    qb = absorb(b)
    products = [x.q * y.q for x, y in zip(qa, qb)]      # units of 1/16
    shifts = [a.e1_8[i // 8] + b.e1_8[i // 8] for i in range(BLOCK_SIZE)]
    shifted = [p << s for p, s in zip(products, shifts)]
    partials = []
    acc = 0
    for v in shifted:
        acc += v
        partials.append(acc)
    if abs(acc) > HIF4_ACC_BOUND * 16:
        raise InvariantViolation(f"S12P4 accumulator overflow: |{acc}|/16 > {HIF4_ACC_BOUND}")

    scale_prod = decode_e6m2(a.e6m2) * decode_e6m2(b.e6m2)
    result = acc / 16.0 * scale_prod
    trace = DotTrace(
        fmt="hif4",
        absorbed_a=qa,
        absorbed_b=qb,
        products=products,
        shifts=shifts,
        partial_sums=partials,
        accumulators=[FixedPointValue(acc, 4, "S12P4")],
        scale_products=[scale_prod],
        scale_multipliers=1,
        wide_multipliers=1,
        result=result,
    )
    return result, trace


def _check_nvfp4_operands(a_groups, b_groups) -> tuple[list[Nvfp4Group], list[Nvfp4Group]]:
    a_groups = list(a_groups)
    b_groups = list(b_groups)
    if len(a_groups) != 4 or len(b_groups) != 4:
        raise UsageError("a 64-length dot needs exactly 4 groups per operand")
    return a_groups, b_groups


def dot_nvfp4_reference(a_groups, b_groups) -> float:
    """Group-by-group binary64 reference: each group's 16-term dot is exact,
    the four group results are then accumulated sequentially."""
    a_groups, b_groups = _check_nvfp4_operands(a_groups, b_groups)
    total = 0.0
    for ga, gb in zip(a_groups, b_groups):
        da = decode_e2m1_array(list(ga.elems)) * decode_e4m3(ga.scale)
        db = decode_e2m1_array(list(gb.elems)) * decode_e4m3(gb.scale)
        part = 0.0
        for i in range(NVFP4_GROUP_SIZE):
            part += da[i] * db[i]
        total += part
    return total


def dot_nvfp4_fixed(a_groups, b_groups) -> tuple[float, DotTrace]:
    """Per-group fixed-point partials, then a 4-term binary64 accumulation."""
    a_groups, b_groups = _check_nvfp4_operands(a_groups, b_groups)

    absorbed_a: list[FixedPointValue] = []
    absorbed_b: list[FixedPointValue] = []
    products: list[int] = []
    partials: list[int] = []
    accs: list[FixedPointValue] = []
    scale_prods: list[float] = []
    total = 0.0
    halves = [1, 2, 3, 4, 6, 8, 12]   # E2M1 magnitudes * 2, indexed by code & 7

    for ga, gb in zip(a_groups, b_groups):
        qa = []
        qb = []
        for g, out in ((ga, qa), (gb, qb)):
            for code in g.elems:
                mag = 0 if (code & 7) == 0 else halves[(code & 7) - 1]
                q = -mag if code & 8 else mag
                out.append(FixedPointValue(q, 1, "S3P1"))   # |q| <= 12
        part = 0
        for x, y in zip(qa, qb):
            p = x.q * y.q                                   # units of 1/4
            products.append(p)
            part += p
            partials.append(part)
        if abs(part) > NVFP4_PARTIAL_BOUND * 4:
            raise InvariantViolation(
                f"S10P2 partial overflow: |{part}|/4 > {NVFP4_PARTIAL_BOUND}"
            )
        sp = decode_e4m3(ga.scale) * decode_e4m3(gb.scale)
        total += part / 4.0 * sp
        absorbed_a.extend(qa)
        absorbed_b.extend(qb)
        accs.append(FixedPointValue(part, 2, "S10P2"))
        scale_prods.append(sp)

    trace = DotTrace(
        fmt="nvfp4",
        absorbed_a=absorbed_a,
        absorbed_b=absorbed_b,
        products=products,
        shifts=[0] * len(products),
        partial_sums=partials,
        accumulators=accs,
        scale_products=scale_prods,
        scale_multipliers=4,
        wide_multipliers=4,
        result=total,
    )
    return total, trace


# ---------------------------------------------------------------------------
# Batch equivalence checking (drives the `dot-check` CLI subcommand)

@dataclass
class DotCheckResult:
    trials: int
    max_abs_diff: float
    width_max: int          # widest integer accumulator seen, native units
    width_bound: int        # the bound it must stay within

    @property
    def ok(self) -> bool:
        return self.max_abs_diff == 0.0 and self.width_max <= self.width_bound

    def summary(self) -> str:
        return (
            f"trials={self.trials} max_abs_diff={self.max_abs_diff:.17g} "
            f"width_max={self.width_max}"
        )


def _philox_u64(seed: int, n: int) -> np.ndarray:
    return np.random.Philox(key=seed & (2**64 - 1)).random_raw(n)


def _random_hif4_fields(raw: np.ndarray, n: int):
    codes = (raw[:n] % 255).astype(np.uint8)                      # finite scales
    e8 = ((raw[n : 2 * n, None] >> np.arange(8, dtype=np.uint64)) & 1).astype(np.uint8)
    e16 = ((raw[2 * n : 3 * n, None] >> np.arange(16, dtype=np.uint64)) & 1).astype(np.uint8)
    nib = raw[3 * n : 19 * n].view(np.uint8).reshape(n, 128)[:, :64]
    elems = (nib & 0xF).astype(np.uint8)
    return codes, e8, e16, elems


def _hif4_batch_check(n: int, seed: int) -> tuple[float, int]:
    raw = _philox_u64(seed, 38 * n)
    ca, e8a, e16a, ea = _random_hif4_fields(raw[: 19 * n], n)
    cb, e8b, e16b, eb = _random_hif4_fields(raw[19 * n :], n)

    # adversarial all-max pair: all elements +-1.75, every micro-exponent set
    ca[0] = cb[0] = 0xFE
    e8a[0] = e8b[0] = 1
    e16a[0] = e16b[0] = 1
    ea[0] = 0x7
    eb[0] = 0x7

    def absorb(e16, elems):
        mag = (elems & 7).astype(np.int64) << np.repeat(e16, 4, axis=1).astype(np.int64)
        return np.where(elems & 8, -mag, mag)

    qa = absorb(e16a, ea)
    qb = absorb(e16b, eb)
    shifts = np.repeat((e8a + e8b).astype(np.int64), 8, axis=1)
    acc = ((qa * qb) << shifts).sum(axis=1)                       # units of 1/16
    width = int(np.abs(acc).max())
    if width > HIF4_ACC_BOUND * 16:
        raise InvariantViolation(f"S12P4 accumulator overflow: {width} > {HIF4_ACC_BOUND * 16}")

    scale_prod = decode_e6m2_array(ca) * decode_e6m2_array(cb)
    fixed = acc.astype(np.float64) / 16.0 * scale_prod

    def decode(codes, e8, e16, elems):
        exps = np.repeat(e8, 8, axis=1).astype(np.float64)
        exps += np.repeat(e16, 4, axis=1)
        return decode_e6m2_array(codes)[:, None] * np.exp2(exps) * decode_s1p2_array(elems)

    # every product and partial sum is exact in binary64, so the summation
    # order cannot matter here
    ref = (decode(ca, e8a, e16a, ea) * decode(cb, e8b, e16b, eb)).sum(axis=1)
    return float(np.abs(fixed - ref).max()), width


def _nvfp4_batch_check(n: int, seed: int) -> tuple[float, int]:
    raw = _philox_u64(seed, 10 * n)
    scales = (raw[: 8 * n].reshape(n, 8) % 126 + 1).astype(np.uint8)   # nonzero finite
    nib = raw[8 * n :].view(np.uint8).reshape(n, 16)
    ea = np.empty((n, 4, 16), dtype=np.uint8)
    eb = np.empty((n, 4, 16), dtype=np.uint8)
    ea.reshape(n, 64)[:] = nib.repeat(4, axis=1) & 0xF
    eb.reshape(n, 64)[:] = (nib.repeat(4, axis=1) >> 4) & 0xF
    sa, sb = scales[:, :4], scales[:, 4:]

    # adversarial all-max: every element +-6 at the top scale
    sa[0] = sb[0] = 0x7E
    ea[0] = 0x7
    eb[0] = 0x7

    halves = np.array([0, 1, 2, 3, 4, 6, 8, 12], dtype=np.int64)

    def absorb(elems):
        mag = halves[(elems & 7).astype(np.int64)]
        return np.where(elems & 8, -mag, mag)

    parts = (absorb(ea) * absorb(eb)).sum(axis=2)                 # units of 1/4
    width = int(np.abs(parts).max())
    if width > NVFP4_PARTIAL_BOUND * 4:
        raise InvariantViolation(f"S10P2 partial overflow: {width} > {NVFP4_PARTIAL_BOUND * 4}")

    spa = decode_e4m3_array(sa)
    spb = decode_e4m3_array(sb)
    pv = parts.astype(np.float64) / 4.0 * (spa * spb)
    fixed = ((pv[:, 0] + pv[:, 1]) + pv[:, 2]) + pv[:, 3]

    # reference: per-group dots over decoded elements (exact), then the
    # same sequential 4-term accumulation
    da = decode_e2m1_array(ea) * spa[:, :, None]
    db = decode_e2m1_array(eb) * spb[:, :, None]
    gsum = (da * db).sum(axis=2)
    ref = ((gsum[:, 0] + gsum[:, 1]) + gsum[:, 2]) + gsum[:, 3]
    return float(np.abs(fixed - ref).max()), width


def run_dot_check(trials: int, seed: int, fmt: str) -> DotCheckResult:
    """Compare the fixed-point flow to the reference over random operands.

    The first operand pair of the first chunk is always the adversarial
    all-max case, so the reported width includes the worst-case witness.
    Raises InvariantViolation on any accumulator-width breach; a nonzero
    max_abs_diff marks an equivalence failure.
    """
    if trials <= 0:
        raise UsageError("trials must be positive")
    if fmt == "hif4":
        check, bound = _hif4_batch_check, HIF4_ACC_BOUND * 16
    elif fmt == "nvfp4":
        check, bound = _nvfp4_batch_check, NVFP4_PARTIAL_BOUND * 4
    else:
        raise UsageError(f"dot-check supports hif4 or nvfp4, got {fmt!r}")

    chunk = 1 << 14
    done = 0
    max_diff = 0.0
    width_max = 0
    while done < trials:
        n = min(chunk, trials - done)
        diff, width = check(n, seed + done)
        max_diff = max(max_diff, diff)
        width_max = max(width_max, width)
        done += n
    return DotCheckResult(trials, max_diff, width_max, bound)
