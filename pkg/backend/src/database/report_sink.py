"""
Report Sink
JSON Lines emission of experiment reports and CSV export.
"""

import logging
from pathlib import Path
from typing import IO, Any, Dict, Iterable, Union

import orjson
import pandas as pd

from src.models.schemas import BoundResult, ExperimentReport

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def report_line(report: ExperimentReport) -> bytes:
    """
    One JSON Lines record: key-sorted body with the timestamp appended last.

    Args:
        report: Report to serialize

    Returns:
        The record without its trailing newline
    """
    body = orjson.dumps(report.body(), option=orjson.OPT_SORT_KEYS)
    return body[:-1] + b',"timestamp":' + orjson.dumps(report.timestamp) + b"}"


def write_report_record(report: ExperimentReport, sink: IO[bytes]) -> None:
    sink.write(report_line(report) + b"\n")
    sink.flush()


def write_bound_record(bound: BoundResult, sink: IO[bytes]) -> None:
    sink.write(orjson.dumps(bound.model_dump(mode="json"), option=orjson.OPT_SORT_KEYS) + b"\n")
    sink.flush()


def report_body(line: Union[str, bytes]) -> Dict[str, Any]:
    """Parse a record and drop its timestamp, the identity used for determinism checks."""
    record = orjson.loads(line)
    record.pop("timestamp", None)
    return record


def read_report_bodies(path: PathLike) -> Iterable[Dict[str, Any]]:
    with open(path, "rb") as f:
        for line in f:
            if line.strip():
                yield report_body(line)


def export_reports_csv(jsonl_path: PathLike, csv_path: PathLike) -> Path:
    """
    Flatten a JSON Lines report file into CSV, one column per params key.

    Args:
        jsonl_path: Report file
        csv_path: Destination

    Returns:
        The CSV path
    """
    frame = pd.read_json(jsonl_path, lines=True, convert_dates=False)
    if "params" in frame.columns:
        params = pd.json_normalize(frame.pop("params").tolist()).add_prefix("params.")
        frame = frame.join(params)
    csv_path = Path(csv_path)
    frame.to_csv(csv_path, index=False)
    logger.info(f"Exported {len(frame)} records to {csv_path}")
    return csv_path
