"""CLI contract: subcommands, determinism, exit codes, error prefixes."""

import numpy as np
import pytest

from bfp4 import cli
from bfp4.dot import DotCheckResult
from bfp4.tensor_io import TensorBuffer, read_container, read_tensor, write_tensor


def make_tensor(tmp_path, values, dims=None, name="in.bfpt"):
    arr = np.asarray(values, dtype=np.float32)
    t = TensorBuffer(dims or arr.shape, "binary32", arr.ravel())
    p = tmp_path / name
    write_tensor(p, t)
    return p, t


# ---------------------------------------------------------------------------
# tables

def test_tables_e6m2(tmp_path, capsys):
    assert cli.main(["tables", "--format", "e6m2"]) == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert lines[0] == "code_hex,value"
    assert len(lines) == 257
    assert lines[1] == "00,3.5527136788005009e-15"        # 2^-48
    assert lines[-1] == "ff,NaN"
    assert lines[0xFE + 1] == "fe,49152"


def test_tables_to_file(tmp_path):
    out = tmp_path / "s1p2.csv"
    assert cli.main(["tables", "--format", "s1p2", "--out", str(out)]) == 0
    lines = out.read_text().strip().split("\n")
    assert len(lines) == 17
    assert lines[1] == "0,0"
    assert lines[8] == "7,1.75"


# ---------------------------------------------------------------------------
# sweep

def test_sweep_csv_stdout(capsys):
    assert cli.main(["sweep", "--rows", "64", "--cols", "64",
                     "--seed", "5", "--x", "0..3"]) == 0
    out1 = capsys.readouterr().out
    lines = out1.strip().split("\n")
    assert lines[0].startswith("# seed=5 ")
    assert len([l for l in lines if not l.startswith("#")]) == 1 + 4
    assert cli.main(["sweep", "--rows", "64", "--cols", "64",
                     "--seed", "5", "--x", "0..3"]) == 0
    assert capsys.readouterr().out == out1                # deterministic


def test_sweep_bad_range(capsys):
    assert cli.main(["sweep", "--x", "9..2"]) == 2
    assert capsys.readouterr().err.startswith("ERROR 2:")
    assert cli.main(["sweep", "--x", "abc"]) == 2


# ---------------------------------------------------------------------------
# dot-check

@pytest.mark.parametrize("fmt", ["hif4", "nvfp4"])
def test_dot_check(fmt, capsys):
    assert cli.main(["dot-check", "--trials", "1000", "--seed", "7",
                     "--format", fmt]) == 0
    out = capsys.readouterr().out
    assert "# seed=7 format=" + fmt in out
    assert "trials=1000 max_abs_diff=0 width_max=" in out


def test_dot_check_violation_exits_1(monkeypatch, capsys):
    monkeypatch.setattr(cli, "run_dot_check",
                        lambda *a, **k: DotCheckResult(1, 1.0, 0, 16))
    assert cli.main(["dot-check", "--trials", "1", "--format", "hif4"]) == 1
    assert capsys.readouterr().err.startswith("ERROR 1:")


# ---------------------------------------------------------------------------
# quantize / dequantize

@pytest.mark.parametrize("fmt", ["hif4", "nvfp4", "mxfp4"])
def test_quantize_dequantize_roundtrip_zero(tmp_path, fmt):
    src, _ = make_tensor(tmp_path, np.zeros(128, dtype=np.float32))
    q = tmp_path / "t.q"
    o = tmp_path / "out.bfpt"
    assert cli.main(["quantize", str(src), "--out", str(q), "--format", fmt]) == 0
    assert cli.main(["dequantize", str(q), "--out", str(o)]) == 0
    back = read_tensor(o)
    assert (back.data == 0).all() and back.dims == (128,)


def test_quantize_exact_peak_vector(tmp_path):
    src, t = make_tensor(tmp_path, [7.0] + [0.0] * 63)
    q = tmp_path / "t.q"
    o = tmp_path / "out.bfpt"
    assert cli.main(["quantize", str(src), "--out", str(q), "--format", "hif4"]) == 0
    assert cli.main(["dequantize", str(q), "--out", str(o)]) == 0
    np.testing.assert_array_equal(read_tensor(o).data, t.data)


def test_quantize_pts_factor(tmp_path):
    src, _ = make_tensor(tmp_path, [13440.0] + [0.0] * 15)
    q = tmp_path / "t.q"
    assert cli.main(["quantize", str(src), "--out", str(q),
                     "--format", "nvfp4", "--pts"]) == 0
    c = read_container(q)
    assert np.float32(c.pts_factor) == np.float32(0.2)


def test_quantize_pts_wrong_format(tmp_path, capsys):
    src, _ = make_tensor(tmp_path, np.ones(64, dtype=np.float32))
    assert cli.main(["quantize", str(src), "--out", str(tmp_path / "t.q"),
                     "--format", "hif4", "--pts"]) == 2
    assert capsys.readouterr().err.startswith("ERROR 2:")


def test_missing_input_file(tmp_path, capsys):
    assert cli.main(["quantize", str(tmp_path / "nope.bfpt"),
                     "--out", str(tmp_path / "t.q"), "--format", "hif4"]) == 2
    assert capsys.readouterr().err.startswith("ERROR 2:")


def test_dequantize_format_mismatch(tmp_path, capsys):
    src, _ = make_tensor(tmp_path, np.ones(16, dtype=np.float32))
    assert cli.main(["dequantize", str(src), "--out", str(tmp_path / "o.bfpt")]) == 2
    assert "ERROR 2:" in capsys.readouterr().err
