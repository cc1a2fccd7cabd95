"""Deterministic fixtures shared by CLI and acceptance tests."""

from __future__ import annotations

import numpy as np

from varboxes import DetectionRecord, GroundTruthRecord


def suppress_fixture_records(n: int = 50, seed: int = 2024) -> list[DetectionRecord]:
    """Fifty clustered detections over two classes and one image, with
    variances, drawn from a fixed Philox stream."""
    rng = np.random.Generator(np.random.Philox(seed))
    records = []
    centers = [(30.0, 30.0), (90.0, 40.0), (50.0, 95.0)]
    for i in range(n):
        cx, cy = centers[int(rng.integers(len(centers)))]
        x1 = cx + rng.uniform(-12, 12)
        y1 = cy + rng.uniform(-12, 12)
        w = rng.uniform(18, 42)
        h = rng.uniform(18, 42)
        records.append(
            DetectionRecord(
                image_id=1,
                category_id=int(rng.integers(1, 3)),
                bbox=(float(x1), float(y1), float(x1 + w), float(y1 + h)),
                score=float(np.round(rng.uniform(0.05, 1.0), 4)),
                var=tuple(float(v) for v in rng.uniform(0.2, 20.0, 4)),
            )
        )
    return records


def misplaced_top_scorer_fixture() -> tuple[list[DetectionRecord], list[GroundTruthRecord]]:
    """One object, two detections: the top-scoring box is offset from the
    ground truth while a lower-scored, low-variance box sits right on it.
    Plain suppression keeps the misplaced box; voting should pull it onto
    the accurate one.
    """
    gt = [GroundTruthRecord(image_id=1, category_id=1, bbox=(10.0, 10.0, 50.0, 50.0))]
    dets = [
        # confident but offset; IoU with GT well below 0.9
        DetectionRecord(
            image_id=1, category_id=1,
            bbox=(14.0, 14.0, 54.0, 54.0), score=0.9,
            var=(50.0, 50.0, 50.0, 50.0),
        ),
        # accurate but timid; tight variances
        DetectionRecord(
            image_id=1, category_id=1,
            bbox=(10.0, 10.0, 50.0, 50.0), score=0.4,
            var=(0.01, 0.01, 0.01, 0.01),
        ),
    ]
    return dets, gt
