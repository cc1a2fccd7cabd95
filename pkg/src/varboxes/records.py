"""JSON-Lines wire formats for detections and ground-truth boxes.

One JSON object per line, UTF-8, fields exactly as named; ``bbox`` is
boundary form [x1, y1, x2, y2] and ``var`` holds per-coordinate variances
(squared pixels). Real numbers are written with 17 significant digits so
that parse(serialize(record)) reproduces every record exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .geometry import Box
from .suppression import Detection

__all__ = [
    "DetectionRecord",
    "GroundTruthRecord",
    "RecordParseError",
    "parse_detection",
    "parse_ground_truth",
    "serialize_detection",
    "serialize_ground_truth",
    "read_detections",
    "read_ground_truths",
    "write_detections",
    "to_detection",
    "from_detection",
]


class RecordParseError(ValueError):
    """Malformed record; carries the 1-based line number when known."""

    def __init__(self, message: str, line_number: int | None = None,
                 path: str | None = None):
        self.line_number = line_number
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line_number is not None:
            where += f"line {line_number}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class DetectionRecord:
    image_id: int
    category_id: int
    bbox: tuple[float, float, float, float]
    score: float
    var: tuple[float, float, float, float] | None = None


@dataclass(frozen=True)
class GroundTruthRecord:
    image_id: int
    category_id: int
    bbox: tuple[float, float, float, float]


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _need_int(obj: dict, key: str) -> int:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise RecordParseError(f"field {key!r} must be an integer, got {value!r}")
    return value


def _need_number(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise RecordParseError(f"{what} must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise RecordParseError(f"{what} must be finite, got {value!r}")
    return value


def _need_bbox(obj: dict) -> tuple[float, float, float, float]:
    raw = obj["bbox"]
    if not isinstance(raw, list) or len(raw) != 4:
        raise RecordParseError(f"field 'bbox' must be a 4-element array, got {raw!r}")
    x1, y1, x2, y2 = (_need_number(v, "bbox entry") for v in raw)
    if x1 > x2 or y1 > y2:
        raise RecordParseError(
            f"bbox boundaries out of order: [{x1}, {y1}, {x2}, {y2}]"
        )
    return (x1, y1, x2, y2)


def _load_object(line: str, allowed: set[str], required: set[str]) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RecordParseError(f"invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise RecordParseError(f"expected a JSON object, got {type(obj).__name__}")
    unknown = set(obj) - allowed
    if unknown:
        raise RecordParseError(f"unknown fields: {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise RecordParseError(f"missing fields: {sorted(missing)}")
    return obj


def parse_detection(line: str) -> DetectionRecord:
    obj = _load_object(
        line,
        allowed={"image_id", "category_id", "bbox", "score", "var"},
        required={"image_id", "category_id", "bbox", "score"},
    )
    score = _need_number(obj["score"], "field 'score'")
    if not 0.0 <= score <= 1.0:
        raise RecordParseError(f"score must lie in [0, 1], got {score!r}")
    var = None
    if "var" in obj:
        raw = obj["var"]
        if not isinstance(raw, list) or len(raw) != 4:
            raise RecordParseError(f"field 'var' must be a 4-element array, got {raw!r}")
        var = tuple(_need_number(v, "var entry") for v in raw)
        for v in var:
            if v <= 0.0:
                raise RecordParseError(f"variances must be positive, got {v!r}")
    return DetectionRecord(
        image_id=_need_int(obj, "image_id"),
        category_id=_need_int(obj, "category_id"),
        bbox=_need_bbox(obj),
        score=score,
        var=var,
    )


def parse_ground_truth(line: str) -> GroundTruthRecord:
    obj = _load_object(
        line,
        allowed={"image_id", "category_id", "bbox"},
        required={"image_id", "category_id", "bbox"},
    )
    return GroundTruthRecord(
        image_id=_need_int(obj, "image_id"),
        category_id=_need_int(obj, "category_id"),
        bbox=_need_bbox(obj),
    )


def serialize_detection(rec: DetectionRecord) -> str:
    parts = [
        f'"image_id": {rec.image_id}',
        f'"category_id": {rec.category_id}',
        '"bbox": [' + ", ".join(_fmt(v) for v in rec.bbox) + "]",
        f'"score": {_fmt(rec.score)}',
    ]
    if rec.var is not None:
        parts.append('"var": [' + ", ".join(_fmt(v) for v in rec.var) + "]")
    return "{" + ", ".join(parts) + "}"


def serialize_ground_truth(rec: GroundTruthRecord) -> str:
    return (
        "{"
        + f'"image_id": {rec.image_id}, "category_id": {rec.category_id}, '
        + '"bbox": [' + ", ".join(_fmt(v) for v in rec.bbox) + "]"
        + "}"
    )


def _read_lines(path: str | Path, parse_one) -> list:
    path = Path(path)
    records = []
    with path.open("r", encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if line.strip() == "":
                raise RecordParseError("blank line", number, str(path))
            try:
                records.append(parse_one(line))
            except RecordParseError as exc:
                raise RecordParseError(str(exc), number, str(path)) from exc
    return records


def read_detections(path: str | Path) -> list[DetectionRecord]:
    return _read_lines(path, parse_detection)


def read_ground_truths(path: str | Path) -> list[GroundTruthRecord]:
    return _read_lines(path, parse_ground_truth)


def write_detections(path: str | Path, records: Iterable[DetectionRecord]) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for rec in records:
            handle.write(serialize_detection(rec) + "\n")


def to_detection(rec: DetectionRecord) -> Detection:
    return Detection(
        box=Box(*rec.bbox),
        score=rec.score,
        class_id=rec.category_id,
        var=rec.var,
    )


def from_detection(det: Detection, image_id: int) -> DetectionRecord:
    return DetectionRecord(
        image_id=image_id,
        category_id=det.class_id,
        bbox=det.box.as_tuple(),
        score=det.score,
        var=det.var,
    )
