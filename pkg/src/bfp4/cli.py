"""Command-line surface: quantize, dequantize, sweep, dot-check, tables.

Exit codes: 0 success, 1 violated internal invariant, 2 usage or file
format error.  Errors go to stderr as `ERROR <code>: message`.
"""

from __future__ import annotations

import argparse
import math
import sys

from .bench import run_sweep, sweep_to_csv
from .codecs import format_table
from .dot import run_dot_check
from .errors import FormatError, InvariantViolation, UsageError
from .tensor_io import (
    dequantize_container,
    quantize_tensor,
    read_container,
    read_tensor,
    write_container,
    write_tensor,
)

_TABLE_FORMATS = ("e6m2", "s1p2", "e2m1", "e4m3", "e8m0", "bf16")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bfp4",
        description="4-bit block floating-point tools: codecs, containers, "
        "error sweep, and dot-product equivalence checks",
    )
    sub = p.add_subparsers(dest="cmd", required=True)

    q = sub.add_parser("quantize", help="tensor file -> quantized container")
    q.add_argument("input")
    q.add_argument("--out", required=True)
    q.add_argument("--format", required=True, choices=["hif4", "nvfp4", "mxfp4"])
    q.add_argument("--pts", action="store_true",
                   help="per-tensor pre-scale to peak 2688 (nvfp4 only)")

    d = sub.add_parser("dequantize", help="quantized container -> binary32 tensor file")
    d.add_argument("input")
    d.add_argument("--out", required=True)

    s = sub.add_parser("sweep", help="Gaussian quantization-error sweep (CSV)")
    s.add_argument("--rows", type=int, default=1024)
    s.add_argument("--cols", type=int, default=1024)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--x", default="0..17", help="noise-level range, e.g. 0..17")
    s.add_argument("--out", help="CSV path (default: stdout)")

    c = sub.add_parser("dot-check",
                       help="fixed-point vs reference dot-product equivalence")
    c.add_argument("--trials", type=int, default=100000)
    c.add_argument("--seed", type=int, default=42)
    c.add_argument("--format", required=True, choices=["hif4", "nvfp4"])

    t = sub.add_parser("tables", help="dump a format's full decode table as CSV")
    t.add_argument("--format", required=True, choices=list(_TABLE_FORMATS))
    t.add_argument("--out", help="CSV path (default: stdout)")
    return p


def _parse_x_range(spec: str) -> tuple[int, int]:
    try:
        lo, hi = spec.split("..")
        lo, hi = int(lo), int(hi)
    except ValueError:
        raise UsageError(f"--x expects lo..hi, got {spec!r}") from None
    if lo > hi:
        raise UsageError(f"--x range is empty: {spec!r}")
    return lo, hi


def _emit(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _cmd_quantize(args) -> int:
    t = read_tensor(args.input)
    write_container(args.out, quantize_tensor(t, args.format, pts=args.pts))
    return 0


def _cmd_dequantize(args) -> int:
    write_tensor(args.out, dequantize_container(read_container(args.input)))
    return 0


def _cmd_sweep(args) -> int:
    if args.rows <= 0 or args.cols <= 0:
        raise UsageError("--rows and --cols must be positive")
    lo, hi = _parse_x_range(args.x)
    rows = run_sweep(args.seed, lo, hi, rows=args.rows, cols=args.cols)
    _emit(sweep_to_csv(rows, args.seed, args.rows, args.cols), args.out)
    return 0


def _cmd_dot_check(args) -> int:
    res = run_dot_check(args.trials, args.seed, args.format)
    print(f"# seed={args.seed} format={args.format}")
    print(res.summary())
    if not res.ok:
        raise InvariantViolation("fixed-point flow diverged from the reference")
    return 0


def _cmd_tables(args) -> int:
    lines = ["code_hex,value"]
    for code_hex, value in format_table(args.format):
        lines.append(f"{code_hex},{'NaN' if math.isnan(value) else f'{value:.17g}'}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


_DISPATCH = {
    "quantize": _cmd_quantize,
    "dequantize": _cmd_dequantize,
    "sweep": _cmd_sweep,
    "dot-check": _cmd_dot_check,
    "tables": _cmd_tables,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _DISPATCH[args.cmd](args)
    except InvariantViolation as e:
        print(f"ERROR 1: {e}", file=sys.stderr)
        return 1
    except (UsageError, FormatError, OSError) as e:
        print(f"ERROR 2: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
