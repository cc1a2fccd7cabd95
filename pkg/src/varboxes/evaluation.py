"""Detection metrics: greedy matching, interpolated AP, and recall caps.

Average precision follows the 101-point interpolation convention: the
precision/recall curve is built from score-ranked true/false positive
flags, the precision envelope is the running maximum from the right, and AP
averages the envelope sampled at recalls 0.00, 0.01, ..., 1.00. The headline
AP averages over IoU thresholds 0.50 to 0.95 in steps of 0.05; named
variants fix a single threshold. Size buckets use box-area cutoffs of 32^2
and 96^2 square pixels, applied to ground truths and detections alike.
Recall caps (AR at 1/10/100) limit detections per image and class to the
top-n by score before matching.

Everything is deterministic and independent of input ordering: detections
are ranked by score descending with ties broken on box coordinates, images
and classes are visited in sorted order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Box, iou_matrix
from .records import DetectionRecord, GroundTruthRecord
from .suppression import Detection

__all__ = [
    "AREA_SMALL_MAX",
    "AREA_MEDIUM_MAX",
    "GroundTruthBox",
    "EvalConfig",
    "PRCurve",
    "EvalResult",
    "IdMismatchError",
    "area_band",
    "match_detections",
    "average_precision",
    "evaluate",
]

AREA_SMALL_MAX = 32.0 ** 2
AREA_MEDIUM_MAX = 96.0 ** 2

_RECALL_LEVELS = np.arange(101) / 100.0


class IdMismatchError(ValueError):
    """Detections reference image or category ids absent from the ground truth."""

    def __init__(self, offenders: list[str]):
        self.offenders = offenders
        super().__init__(
            "detections reference unknown ids: " + "; ".join(offenders)
        )


def area_band(box: Box) -> str:
    """Size bucket of a box by area: small / medium / large."""
    area = box.area
    if area < AREA_SMALL_MAX:
        return "small"
    if area < AREA_MEDIUM_MAX:
        return "medium"
    return "large"


@dataclass(frozen=True)
class GroundTruthBox:
    """An annotated box; the size bucket is derived from its area."""

    box: Box
    class_id: int
    image_id: int

    def __post_init__(self) -> None:
        if self.box.is_crossed:
            raise ValueError(f"ground-truth box has crossed boundaries: {self.box}")
        object.__setattr__(self, "class_id", int(self.class_id))
        object.__setattr__(self, "image_id", int(self.image_id))

    @property
    def area_band(self) -> str:
        return area_band(self.box)

    @classmethod
    def from_record(cls, rec: GroundTruthRecord) -> "GroundTruthBox":
        return cls(box=Box(*rec.bbox), class_id=rec.category_id, image_id=rec.image_id)


@dataclass(frozen=True)
class EvalConfig:
    """Threshold grid and reporting knobs."""

    iou_thresholds: tuple[float, ...] = tuple(
        round(0.5 + 0.05 * i, 2) for i in range(10)
    )
    report_thresholds: tuple[float, ...] = (0.5, 0.6, 0.7, 0.75, 0.8, 0.9)
    recall_caps: tuple[int, ...] = (1, 10, 100)
    max_detections: int = 100

    def __post_init__(self) -> None:
        if not self.iou_thresholds:
            raise ValueError("iou_thresholds must not be empty")
        for t in self.iou_thresholds:
            if not 0.0 < t <= 1.0:
                raise ValueError(f"IoU thresholds must lie in (0, 1], got {t!r}")
        if self.max_detections < 1:
            raise ValueError("max_detections must be >= 1")


@dataclass(frozen=True)
class PRCurve:
    precision: np.ndarray
    recall: np.ndarray
    ap: float


@dataclass(frozen=True)
class EvalResult:
    """Aggregate metrics plus per-class curves at each IoU threshold."""

    metrics: dict[str, float]
    curves: dict[tuple[int, float], PRCurve] = field(default_factory=dict)
    class_ids: tuple[int, ...] = ()


def match_detections(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruthBox],
    iou_thresh: float,
) -> list[tuple[int, int | None]]:
    """Greedy one-to-one matching for a single image and class.

    Detections are processed by descending score (ties: box coordinates,
    then input position); each takes the highest-IoU not-yet-matched ground
    truth with IoU >= ``iou_thresh``, ties going to the lower ground-truth
    index. Returns (detection index, ground-truth index or None) pairs in
    processing order.
    """
    order = sorted(
        range(len(dets)),
        key=lambda i: (-dets[i].score, dets[i].box.as_tuple(), i),
    )
    if not gts:
        return [(d, None) for d in order]
    if not dets:
        return []
    table = iou_matrix(
        np.array([d.box.as_tuple() for d in dets], dtype=float),
        np.array([g.box.as_tuple() for g in gts], dtype=float),
    )
    taken = [False] * len(gts)
    out: list[tuple[int, int | None]] = []
    for d in order:
        best_g = None
        best_iou = -1.0
        for g in range(len(gts)):
            if taken[g]:
                continue
            overlap = table[d, g]
            if overlap >= iou_thresh and overlap > best_iou:
                best_iou = overlap
                best_g = g
        if best_g is not None:
            taken[best_g] = True
        out.append((d, best_g))
    return out


def average_precision(
    scored_matches: Sequence[tuple[float, bool]], n_gt: int
) -> float:
    """101-point interpolated AP from (score, is_true_positive) pairs.

    Pairs are ranked by descending score (stable). Returns NaN when there is
    no ground truth to recall (callers exclude such classes from means).
    """
    if n_gt < 0:
        raise ValueError("n_gt must be >= 0")
    if n_gt == 0:
        return float("nan")
    if not scored_matches:
        return 0.0
    precision, recall = _pr_curve(scored_matches, n_gt)
    return _ap_from_curve(precision, recall)


def _pr_curve(
    scored_matches: Sequence[tuple[float, bool]], n_gt: int
) -> tuple[np.ndarray, np.ndarray]:
    order = sorted(
        range(len(scored_matches)), key=lambda i: (-scored_matches[i][0], i)
    )
    flags = np.array([bool(scored_matches[i][1]) for i in order])
    tp = np.cumsum(flags)
    fp = np.cumsum(~flags)
    precision = tp / (tp + fp)
    recall = tp / n_gt
    return precision, recall


def _ap_from_curve(precision: np.ndarray, recall: np.ndarray) -> float:
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, _RECALL_LEVELS, side="left")
    sampled = np.where(idx < len(envelope), envelope[np.minimum(idx, len(envelope) - 1)], 0.0)
    return float(sampled.mean())


def _record_sort_key(item: tuple[int, DetectionRecord]):
    i, rec = item
    return (-rec.score, rec.bbox, i)


def _band_of_bbox(bbox: tuple[float, float, float, float]) -> str:
    return area_band(Box(*bbox))


def evaluate(
    dets: Sequence[DetectionRecord],
    gts: Sequence[GroundTruthBox],
    config: EvalConfig | None = None,
) -> EvalResult:
    """Full metric table over images, classes, IoU thresholds, and size bands.

    Classes enter a mean only where they have at least one ground truth (in
    the relevant size band); a band with no ground truth at all reports NaN.
    Detections referencing unknown image or category ids raise
    :class:`IdMismatchError` listing every offender.
    """
    config = config if config is not None else EvalConfig()
    gt_images = {g.image_id for g in gts}
    gt_classes = sorted({g.class_id for g in gts})
    known_classes = set(gt_classes)
    offenders = []
    for i, rec in enumerate(dets):
        if rec.image_id not in gt_images:
            offenders.append(f"record {i}: image_id {rec.image_id}")
        elif rec.category_id not in known_classes:
            offenders.append(f"record {i}: category_id {rec.category_id}")
    if offenders:
        raise IdMismatchError(offenders)

    images = sorted(gt_images)
    gt_by_img_cls: dict[tuple[int, int], list[GroundTruthBox]] = {}
    for g in gts:
        gt_by_img_cls.setdefault((g.image_id, g.class_id), []).append(g)
    det_by_img_cls: dict[tuple[int, int], list[DetectionRecord]] = {}
    for i, rec in enumerate(dets):
        det_by_img_cls.setdefault((rec.image_id, rec.category_id), []).append((i, rec))
    for key in det_by_img_cls:
        det_by_img_cls[key] = [
            rec for _, rec in sorted(det_by_img_cls[key], key=_record_sort_key)
        ]

    thresholds = config.iou_thresholds
    curves: dict[tuple[int, float], PRCurve] = {}
    band_ap: dict[str, list[float]] = {b: [] for b in ("all", "small", "medium", "large")}
    recall_by_cap: dict[int, list[float]] = {n: [] for n in config.recall_caps}

    for band in ("all", "small", "medium", "large"):
        for cls in gt_classes:
            n_gt = sum(
                1
                for g in gts
                if g.class_id == cls and (band == "all" or g.area_band == band)
            )
            if n_gt == 0:
                continue
            for thr in thresholds:
                flags: list[tuple[float, bool]] = []
                ranked_flags: list[tuple[int, bool]] = []  # (rank within image, tp)
                for img in images:
                    gt_list = [
                        g
                        for g in gt_by_img_cls.get((img, cls), [])
                        if band == "all" or g.area_band == band
                    ]
                    det_list = [
                        rec
                        for rec in det_by_img_cls.get((img, cls), [])
                        if band == "all" or _band_of_bbox(rec.bbox) == band
                    ]
                    det_list = det_list[: config.max_detections]
                    det_objs = [
                        Detection(box=Box(*rec.bbox), score=rec.score, class_id=cls)
                        for rec in det_list
                    ]
                    matched = match_detections(det_objs, gt_list, thr)
                    for rank, (d, g) in enumerate(matched):
                        flags.append((det_list[d].score, g is not None))
                        ranked_flags.append((rank, g is not None))
                ap = average_precision(flags, n_gt) if flags else 0.0
                band_ap[band].append(ap)
                if band == "all":
                    if flags:
                        precision, recall = _pr_curve(flags, n_gt)
                    else:
                        precision = np.zeros(0)
                        recall = np.zeros(0)
                    curves[(cls, thr)] = PRCurve(precision, recall, ap)
                    for cap in config.recall_caps:
                        matched_n = sum(
                            1 for rank, tp in ranked_flags if tp and rank < cap
                        )
                        recall_by_cap[cap].append(matched_n / n_gt)

    n_thr = len(thresholds)
    n_cls = len(gt_classes)
    metrics: dict[str, float] = {}
    metrics["AP"] = _mean(band_ap["all"])
    for thr in config.report_thresholds:
        key = f"AP{int(round(thr * 100))}"
        if thr in thresholds and n_cls:
            t_index = thresholds.index(thr)
            per_thr = [
                band_ap["all"][c * n_thr + t_index] for c in range(n_cls)
            ]
            metrics[key] = _mean(per_thr)
        else:
            metrics[key] = float("nan")
    metrics["APsmall"] = _mean(band_ap["small"])
    metrics["APmedium"] = _mean(band_ap["medium"])
    metrics["APlarge"] = _mean(band_ap["large"])
    for cap in config.recall_caps:
        metrics[f"AR{cap}"] = _mean(recall_by_cap[cap])
    return EvalResult(
        metrics=metrics, curves=curves, class_ids=tuple(gt_classes)
    )


def _mean(values: list[float]) -> float:
    if not values:
        return float("nan")
    return float(np.mean(values))
