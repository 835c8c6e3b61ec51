import csv

import orjson

from src.database.report_sink import (
    export_reports_csv,
    read_report_bodies,
    report_body,
    report_line,
    write_bound_record,
    write_report_record,
)
from src.models.schemas import BoundResult, Comparison, ExperimentReport


def _report(estimate=0.1, name="density_easy"):
    return ExperimentReport.judged(name, estimate, 0.01, 0.05, Comparison.GE, params={"d": 2, "lambda": 0.5}, seed=3)


def test_report_line_is_sorted_with_the_timestamp_last():
    line = report_line(_report())
    assert b'"verdict":"pass"' in line
    keys = list(orjson.loads(line))
    assert keys[-1] == "timestamp"
    assert keys[:-1] == sorted(keys[:-1])


def test_report_body_ignores_the_timestamp():
    a, b = _report(), _report()
    b.timestamp = "2000-01-01T00:00:00+00:00"
    assert report_body(report_line(a)) == report_body(report_line(b))


def test_one_line_per_report(tmp_path):
    path = tmp_path / "reports.jsonl"
    with open(path, "wb") as sink:
        for k in range(3):
            write_report_record(_report(0.1 * (k + 1)), sink)
    bodies = list(read_report_bodies(path))
    assert len(bodies) == 3
    assert [b["estimate"] for b in bodies] == [0.1, 0.2, 0.30000000000000004]
    assert all("timestamp" not in b for b in bodies)


def test_bound_records_are_key_sorted(tmp_path):
    path = tmp_path / "bounds.jsonl"
    with open(path, "wb") as sink:
        write_bound_record(BoundResult(value=0.5, formula_id="lambda_c_lower", inputs={"d": 2}), sink)
    record = orjson.loads(path.read_bytes())
    assert list(record) == ["formula_id", "inputs", "value"]


def test_csv_export_flattens_params(tmp_path):
    jsonl = tmp_path / "reports.jsonl"
    with open(jsonl, "wb") as sink:
        write_report_record(_report(), sink)
        write_report_record(_report(0.01, "density_jjp"), sink)
    out = export_reports_csv(jsonl, tmp_path / "reports.csv")
    with open(out, newline="") as f:
        rows = list(csv.DictReader(f))
    assert [row["name"] for row in rows] == ["density_easy", "density_jjp"]
    assert [row["verdict"] for row in rows] == ["pass", "fail"]
    assert rows[0]["params.d"] == "2"
    assert "params.lambda" in rows[0]
