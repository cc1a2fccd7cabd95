"""Wire-format round trips and line-addressed parse failures."""

import numpy as np
import pytest

from varboxes import DetectionRecord, RecordParseError, read_detections
from varboxes.records import (
    parse_detection,
    parse_ground_truth,
    serialize_detection,
    serialize_ground_truth,
    to_detection,
    from_detection,
    write_detections,
)


class TestRoundTrip:
    def test_random_records_survive_exactly(self):
        rng = np.random.default_rng(71)
        for _ in range(300):
            x1, y1 = rng.uniform(-1e6, 1e6, 2)
            w, h = rng.uniform(0, 1e5, 2)
            rec = DetectionRecord(
                image_id=int(rng.integers(0, 10**9)),
                category_id=int(rng.integers(0, 1000)),
                bbox=(x1, y1, x1 + w, y1 + h),
                score=float(rng.uniform()),
                var=tuple(float(v) for v in 10.0 ** rng.uniform(-8, 8, 4))
                if rng.uniform() < 0.5
                else None,
            )
            assert parse_detection(serialize_detection(rec)) == rec

    def test_awkward_floats(self):
        rec = DetectionRecord(
            1, 2, (0.1, 1e-300, 0.30000000000000004, 1 / 3), 1e-12
        )
        assert parse_detection(serialize_detection(rec)) == rec

    def test_ground_truth_round_trip(self):
        line = serialize_ground_truth(
            parse_ground_truth('{"image_id": 3, "category_id": 1, "bbox": [0, 0, 2.5, 7]}')
        )
        rec = parse_ground_truth(line)
        assert rec.image_id == 3 and rec.bbox == (0.0, 0.0, 2.5, 7.0)

    def test_detection_conversion_round_trip(self):
        rec = DetectionRecord(7, 2, (1.0, 2.0, 3.0, 4.0), 0.5, (1.0, 1.0, 2.0, 2.0))
        det = to_detection(rec)
        assert from_detection(det, 7) == rec


class TestParseFailures:
    @pytest.mark.parametrize(
        "line",
        [
            "not json",
            "[1, 2, 3]",
            '{"image_id": 1, "category_id": 1, "bbox": [0,0,1,1]}',  # no score
            '{"image_id": 1, "category_id": 1, "bbox": [0,0,1,1], "score": 0.5, "extra": 1}',
            '{"image_id": 1.5, "category_id": 1, "bbox": [0,0,1,1], "score": 0.5}',
            '{"image_id": true, "category_id": 1, "bbox": [0,0,1,1], "score": 0.5}',
            '{"image_id": 1, "category_id": 1, "bbox": [0,0,1], "score": 0.5}',
            '{"image_id": 1, "category_id": 1, "bbox": [2,0,1,1], "score": 0.5}',
            '{"image_id": 1, "category_id": 1, "bbox": [0,0,1,1], "score": 1.5}',
            '{"image_id": 1, "category_id": 1, "bbox": [0,0,1,1], "score": 0.5, "var": [1,1,1]}',
            '{"image_id": 1, "category_id": 1, "bbox": [0,0,1,1], "score": 0.5, "var": [1,1,1,0]}',
            '{"image_id": 1, "category_id": 1, "bbox": [0,0,"a",1], "score": 0.5}',
        ],
    )
    def test_bad_lines_rejected(self, line):
        with pytest.raises(RecordParseError):
            parse_detection(line)

    def test_reader_reports_line_number_and_path(self, tmp_path):
        path = tmp_path / "dets.jsonl"
        path.write_text(
            '{"image_id": 1, "category_id": 1, "bbox": [0,0,1,1], "score": 0.5}\n'
            "garbage\n"
        )
        with pytest.raises(RecordParseError) as err:
            read_detections(path)
        assert err.value.line_number == 2
        assert "dets.jsonl" in str(err.value)

    def test_blank_line_rejected(self, tmp_path):
        path = tmp_path / "dets.jsonl"
        path.write_text(
            '{"image_id": 1, "category_id": 1, "bbox": [0,0,1,1], "score": 0.5}\n\n'
        )
        with pytest.raises(RecordParseError) as err:
            read_detections(path)
        assert err.value.line_number == 2

    def test_non_finite_rejected(self):
        with pytest.raises(RecordParseError):
            parse_detection(
                '{"image_id": 1, "category_id": 1, "bbox": [0,0,1,1], "score": NaN}'
            )


class TestFileIo:
    def test_write_then_read(self, tmp_path):
        records = [
            DetectionRecord(1, 1, (0.0, 0.0, 10.0, 10.0), 0.25),
            DetectionRecord(2, 3, (1.5, 2.5, 3.5, 4.5), 1.0, (0.5, 0.5, 0.5, 0.5)),
        ]
        path = tmp_path / "out.jsonl"
        write_detections(path, records)
        assert read_detections(path) == records
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        assert lines[0].startswith('{"image_id": 1, "category_id": 1, ')
