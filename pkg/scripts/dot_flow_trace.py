#!/usr/bin/env python3
"""Print the stage-by-stage fixed-point dot-product flow for a sample pair.

Shows the absorbed 5-bit operands, the exact integer products and shifts,
the single integer accumulator with its bound, and the final scale multiply,
side by side with the binary64 reference value.
"""

import argparse

import numpy as np

from bfp4.block import encode_hif4
from bfp4.codecs import decode_e6m2
from bfp4.dot import HIF4_ACC_BOUND, dot_hif4_fixed, dot_reference


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--sigma", type=float, default=1.0)
    args = ap.parse_args()

    rng = np.random.Generator(np.random.Philox(key=args.seed))
    a = encode_hif4(rng.normal(scale=args.sigma, size=64))
    b = encode_hif4(rng.normal(scale=args.sigma, size=64))
    result, trace = dot_hif4_fixed(a, b)

    print(f"scales: {decode_e6m2(a.e6m2):.6g} x {decode_e6m2(b.e6m2):.6g} "
          f"= {trace.scale_products[0]:.6g}")
    print("first 8 lanes (absorbed operands are S2P2 quarters):")
    for i in range(8):
        print(f"  lane {i}: {trace.absorbed_a[i].q:4d} * {trace.absorbed_b[i].q:4d}"
              f" = {trace.products[i]:5d}/16  << {trace.shifts[i]}")
    acc = trace.accumulators[0]
    print(f"integer accumulator: {acc.q}/16 = {acc.value} "
          f"(bound {HIF4_ACC_BOUND}, {trace.scale_multipliers} scale multiplier, "
          f"{trace.wide_multipliers} wide multiplier)")
    print(f"fixed-point result: {result!r}")
    print(f"reference:          {dot_reference(a, b)!r}")
    print(f"trace replay:       {trace.replay()!r}")


if __name__ == "__main__":
    main()
