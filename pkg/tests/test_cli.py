import json
import os
from pathlib import Path

import pytest

from gradpert.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _run(tmp_path, command, text=None, config=None, name="c.ini"):
    if text is not None:
        config = tmp_path / name
        config.write_text(text)
    out = tmp_path / "out"
    code = main([command, "--config", str(config), "--out", str(out)])
    return code, out


def _report(out, prefix="kp"):
    return json.loads((out / f"{prefix}_report.json").read_text())


def test_partition_example(tmp_path):
    code, out = _run(tmp_path, "partition", config=CONFIGS / "partition_rate.ini")
    assert code == 0
    rep = _report(out)
    assert [r[1] for r in rep["tables"]["partition"]["rows"]] == pytest.approx([0.0, 0.8, 1.6, 2.0])
    assert rep["results"]["m"] == 3


def test_zero_drift_series(tmp_path):
    code, out = _run(tmp_path, "series", config=CONFIGS / "zero_drift.ini")
    assert code == 0
    rows = _report(out)["tables"]["terms"]["rows"]
    # zero drift: every higher term vanishes
    assert all(r[3] == 0.0 for r in rows if r[2] > 0)


def test_series_bounds_verdict(tmp_path):
    code, out = _run(tmp_path, "series", config=CONFIGS / "constant_drift.ini")
    rep = _report(out)
    assert code == 0 and rep["verdicts"] == {"bounds": True, "finite": True}
    lo, hi = rep["results"]["lower_factor"], rep["results"]["upper_factor"]
    assert 0 < lo < 1 < hi


def test_deterministic_rerun(tmp_path):
    _, out1 = _run(tmp_path, "series", config=CONFIGS / "zero_drift.ini")
    first = {p.name: p.read_bytes() for p in out1.iterdir() if "timing" not in p.name}
    echo = tmp_path / "echo.ini"
    echo.write_text((out1 / "kp_config.ini").read_text())
    for p in out1.iterdir():
        p.unlink()
    _, out2 = _run(tmp_path, "series", config=echo)
    second = {p.name: p.read_bytes() for p in out2.iterdir() if "timing" not in p.name}
    assert first == second


def test_kernel_command(tmp_path):
    code, out = _run(tmp_path, "kernel", "[samples]\ntimes = 0.5, 2\ny = 0, 1\n[output]\nprefix = k\n")
    assert code == 0
    rows = _report(out, "k")["tables"]["kernel"]["rows"]
    assert len(rows) == 4 and (out / "k_kernel.csv").exists()


def test_scan_command(tmp_path):
    text = "[scan]\nscans = gradient, envelope\nlevels = 5, 9\npair_levels = 3, 5\n"
    code, out = _run(tmp_path, "scan", text)
    rep = _report(out)
    assert code == 0 and rep["verdicts"]["factor_inequality"]


def test_exit_codes(tmp_path, monkeypatch):
    assert _run(tmp_path, "series", "[control]\neta = 0.6\n")[0] == 3
    assert _run(tmp_path, "series", "[kernel]\nalpha = 3\n")[0] == 3
    assert _run(tmp_path, "series", config=tmp_path / "missing.ini")[0] == 3
    assert _run(tmp_path, "partition", "[control]\nrate = 1\n[partition]\ntheta = 0.5\nend = 1\n")[0] == 0
    monkeypatch.setenv("KP_LOG", "loud")
    assert _run(tmp_path, "partition", config=CONFIGS / "partition_rate.ini")[0] == 3
    monkeypatch.setenv("KP_LOG", "info")
    assert _run(tmp_path, "partition", config=CONFIGS / "partition_rate.ini")[0] == 0
    with pytest.raises(SystemExit):
        main(["frobnicate", "--config", "x"])


def test_failed_verdict_exit_one(tmp_path):
    # a bound far tighter than the drift allows
    text = ("[kernel]\nalpha = 1.5\n[drift]\nfamily = constant\nc = 3\n[control]\neta = 0.01\nrate = 0\n"
            "[samples]\nt = 0.5\nx = 0\ny = -1, 0, 1\n[series]\norder = 6\n")
    code, out = _run(tmp_path, "series", text)
    assert code == 1 and _report(out)["verdicts"]["bounds"] is False


def test_timing_sidecar(tmp_path):
    _, out = _run(tmp_path, "partition", config=CONFIGS / "partition_rate.ini")
    timing = json.loads((out / "kp_timing.json").read_text())
    assert timing["threads"] >= 1 and timing["total"] >= 0


@pytest.mark.slow
def test_verify_reference_config(tmp_path):
    code, out = _run(tmp_path, "verify", config=CONFIGS / "verify.ini")
    rep = _report(out)
    assert len(rep["tables"]["criteria"]["rows"]) == 12
    assert code == 0, [r for r in rep["tables"]["criteria"]["rows"] if not r[2]]
