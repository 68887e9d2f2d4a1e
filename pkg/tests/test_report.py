import csv
import json
import math

import numpy as np
import pytest

from gradpert.report import Report, Table, format_number


def test_format_number():
    assert format_number(0.1) == "0.10000000000000001"
    assert float(format_number(1 / 3)) == 1 / 3
    assert format_number(np.float64(2.5)) == "2.5"
    assert format_number(3) == "3" and format_number(np.int64(4)) == "4"
    assert format_number(True) == "true" and format_number(np.bool_(False)) == "false"
    assert format_number("x") == "x"


def test_table_rejects_ragged_rows():
    t = Table(("a", "b"))
    with pytest.raises(ValueError):
        t.add(1)


def test_report_write(tmp_path):
    t = Table(("x", "v"))
    t.add(0.0, 1 / 3)
    t.add(1.0, math.inf)
    rep = Report("series", "[run]\ncommand = series\n", {"terms": t}, {"finite": True, "bounds": False},
                 {"h": np.float64(0.25), "arr": np.arange(2), "bad": math.nan})
    rep.timing["total"] = 1.5
    paths = rep.write(tmp_path / "out", "run1")
    assert not rep.passed
    with open(paths["terms"]) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "v"] and float(rows[1][1]) == 1 / 3 and rows[2][1] == "inf"
    doc = json.loads(open(paths["report.json"]).read())
    assert doc["passed"] is False and doc["results"]["arr"] == [0, 1] and doc["results"]["bad"] == "nan"
    assert "timing" not in doc
    assert json.loads(open(paths["timing.json"]).read()) == {"total": 1.5}
    summary = open(paths["summary.txt"]).read()
    assert "FAIL  bounds" in summary and summary.rstrip().endswith("overall: FAIL")
    assert open(paths["config.ini"]).read() == rep.config_echo


def test_report_json_ignores_timing():
    a = Report("kernel", "", {}, {"ok": True})
    b = Report("kernel", "", {}, {"ok": True}, timing={"total": 9.0})
    assert a.to_json() == b.to_json() and a.passed
