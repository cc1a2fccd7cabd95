"""Detection suppression: greedy NMS, soft score decay, and variance voting.

The pipeline is one greedy loop per class: repeatedly select the highest
scored remaining detection, then either delete overlapping neighbors (hard
NMS) or decay their scores (soft NMS), and optionally re-estimate the
selected box as a weighted mean over every initially-overlapping box. The
voting weight of a neighbor combines its overlap with the selected box and
its per-coordinate predicted variance,

    p_i = exp(-(1 - IoU(b_i, b))^2 / sigma_t)
    x   = sum_i (p_i * x_i / var_i) / sum_i (p_i / var_i),   IoU(b_i, b) > 0

computed independently for each of the four coordinates. Classification
scores are deliberately not part of the weights: a low-scored neighbor can
still be the best-localized one. Voting reads original coordinates only
(votes never cascade) and leaves the selected detection's score and
variances untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .geometry import Box, iou_matrix
from .validation import check_detections, check_finite_scalar

__all__ = [
    "Detection",
    "SuppressConfig",
    "hard_nms",
    "soft_nms_decay",
    "variance_vote",
    "suppress",
    "VarianceVotingSuppressor",
]

SOFT_MODES = ("off", "linear", "gaussian")
VOTE_POOLS = ("initial", "survivors")


@dataclass(frozen=True)
class Detection:
    """A scored box, optionally carrying per-coordinate variances.

    ``var`` holds the predicted variance (squared pixels) of x1, y1, x2, y2
    in that order; it is required by voting and ignored everywhere else.
    """

    box: Box
    score: float
    class_id: int
    var: tuple[float, float, float, float] | None = None

    def __post_init__(self) -> None:
        score = check_finite_scalar("score", self.score)
        if not 0.0 <= score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {score!r}")
        object.__setattr__(self, "score", score)
        object.__setattr__(self, "class_id", int(self.class_id))
        if self.var is not None:
            var = tuple(float(v) for v in self.var)
            if len(var) != 4:
                raise ValueError(f"var must have 4 entries, got {len(var)}")
            for v in var:
                if not (math.isfinite(v) and v > 0.0):
                    raise ValueError(f"variances must be positive and finite, got {v!r}")
            object.__setattr__(self, "var", var)


def _validate_config(cfg: "SuppressConfig") -> None:
    sigma_t = check_finite_scalar("sigma_t", cfg.sigma_t)
    if sigma_t <= 0.0:
        raise ValueError(f"sigma_t must be positive, got {sigma_t!r}")
    if cfg.soft_nms not in SOFT_MODES:
        raise ValueError(f"soft_nms must be one of {SOFT_MODES}, got {cfg.soft_nms!r}")
    soft_sigma = check_finite_scalar("soft_sigma", cfg.soft_sigma)
    if soft_sigma <= 0.0:
        raise ValueError(f"soft_sigma must be positive, got {soft_sigma!r}")
    thresh = check_finite_scalar("nms_iou_thresh", cfg.nms_iou_thresh)
    if not 0.0 < thresh < 1.0:
        raise ValueError(f"nms_iou_thresh must lie in (0, 1), got {thresh!r}")
    floor = check_finite_scalar("score_floor", cfg.score_floor)
    if floor < 0.0:
        raise ValueError(f"score_floor must be >= 0, got {floor!r}")
    if cfg.vote_pool not in VOTE_POOLS:
        raise ValueError(f"vote_pool must be one of {VOTE_POOLS}, got {cfg.vote_pool!r}")


@dataclass(frozen=True)
class SuppressConfig:
    """Suppression knobs.

    sigma_t is the voting temperature: small values concentrate the vote on
    near-identical boxes, large values flatten it toward a pure
    inverse-variance mean. 0.02 works well; roughly 0.005 to 0.05 is a
    usable range. ``vote_pool`` selects whether voting sees every initial
    box (default, matching the greedy loop as written) or only boxes not yet
    suppressed ("survivors", a documented non-default alternative).
    """

    sigma_t: float = 0.02
    soft_nms: str = "off"
    soft_sigma: float = 0.5
    nms_iou_thresh: float = 0.5
    score_floor: float = 0.001
    voting: bool = False
    vote_pool: str = "initial"

    def __post_init__(self) -> None:
        _validate_config(self)


def soft_nms_decay(score: float, overlap: float, cfg: SuppressConfig) -> float:
    """Decayed score of a neighbor with the given IoU against the selection.

    Linear mode decays only above the NMS threshold by (1 - IoU); Gaussian
    mode decays continuously by exp(-IoU^2 / soft_sigma). Mode "off" returns
    the score unchanged. The result never exceeds the input score.
    """
    if not 0.0 <= overlap <= 1.0:
        raise ValueError(f"overlap must lie in [0, 1], got {overlap!r}")
    if cfg.soft_nms == "linear":
        if overlap > cfg.nms_iou_thresh:
            return score * (1.0 - overlap)
        return score
    if cfg.soft_nms == "gaussian":
        return score * math.exp(-(overlap * overlap) / cfg.soft_sigma)
    return score


def hard_nms(dets: Sequence[Detection], thresh: float) -> list[Detection]:
    """Greedy NMS over a single class: keep the best remaining detection,
    delete neighbors with IoU strictly above ``thresh``. Output is sorted by
    descending score; ties keep the earlier input detection first.
    """
    dets = check_detections(dets)
    if not dets:
        return []
    if len({d.class_id for d in dets}) > 1:
        raise ValueError("hard_nms expects detections of a single class")
    boxes = np.array([d.box.as_tuple() for d in dets], dtype=float)
    scores = np.array([d.score for d in dets], dtype=float)
    overlaps = iou_matrix(boxes, boxes)
    alive = np.ones(len(dets), dtype=bool)
    keep: list[int] = []
    while alive.any():
        m = int(np.argmax(np.where(alive, scores, -np.inf)))
        keep.append(m)
        alive[m] = False
        alive &= ~(overlaps[m] > thresh)
    return [dets[i] for i in keep]


def variance_vote(
    selected: Detection, pool: Sequence[Detection], sigma_t: float
) -> Box:
    """Vote the selected detection's coordinates from overlapping pool boxes.

    Every pool member needs a variance vector. The selected detection may or
    may not itself be in the pool; at least one pool box must overlap it.
    Score and variance of the selection are not modified, only the returned
    box coordinates.
    """
    sigma_t = check_finite_scalar("sigma_t", sigma_t)
    if sigma_t <= 0.0:
        raise ValueError(f"sigma_t must be positive, got {sigma_t!r}")
    pool = check_detections(pool, require_var=True)
    if not pool:
        raise ValueError("voting pool must not be empty")
    boxes = np.array([d.box.as_tuple() for d in pool], dtype=float)
    variances = np.array([d.var for d in pool], dtype=float)
    overlaps = iou_matrix(
        np.array([selected.box.as_tuple()], dtype=float), boxes
    )[0]
    mask = overlaps > 0.0
    if not mask.any():
        raise ValueError("no pool box overlaps the selected detection")
    if mask.sum() == 1:
        # a weighted mean of one box is that box; skip the arithmetic so the
        # self-vote identity holds exactly
        return pool[int(np.flatnonzero(mask)[0])].box
    p = np.exp(-((1.0 - overlaps[mask]) ** 2) / sigma_t)
    weights = p[:, None] / variances[mask]
    coords = (weights * boxes[mask]).sum(axis=0) / weights.sum(axis=0)
    return Box(*coords)


def _class_pipeline(
    boxes: np.ndarray,
    scores: np.ndarray,
    variances: np.ndarray | None,
    cfg: SuppressConfig,
) -> list[tuple[int, np.ndarray, float]]:
    """Greedy loop over one class. Returns (input position, box, score)
    tuples in emission order; positions index the per-class arrays.
    """
    n = len(boxes)
    overlaps = iou_matrix(boxes, boxes)
    work = scores.astype(float).copy()
    alive = np.ones(n, dtype=bool)
    positions = np.arange(n)
    emitted: list[tuple[int, np.ndarray, float]] = []

    while alive.any():
        # argmax over remaining; ties resolve to the earliest input position
        m = int(np.argmax(np.where(alive, work, -np.inf)))
        alive[m] = False
        row = overlaps[m]

        if cfg.soft_nms == "off":
            alive &= ~(row > cfg.nms_iou_thresh)
        elif cfg.soft_nms == "linear":
            decay = np.where(row > cfg.nms_iou_thresh, 1.0 - row, 1.0)
            work[alive] *= decay[alive]
        else:
            work[alive] *= np.exp(-(row[alive] ** 2) / cfg.soft_sigma)

        if cfg.voting:
            if cfg.vote_pool == "initial":
                pool = row > 0.0
            else:
                pool = (alive | (positions == m)) & (row > 0.0)
            if not pool.any():
                raise ValueError(
                    "variance voting found no overlapping boxes (degenerate selection)"
                )
            if pool.sum() == 1:
                # single-member weighted mean: exact identity, no arithmetic
                voted = boxes[int(np.flatnonzero(pool)[0])]
            else:
                p = np.exp(-((1.0 - row[pool]) ** 2) / cfg.sigma_t)
                weights = p[:, None] / variances[pool]
                voted = (weights * boxes[pool]).sum(axis=0) / weights.sum(axis=0)
            emitted.append((m, voted, float(work[m])))
        else:
            emitted.append((m, boxes[m], float(work[m])))

    if cfg.soft_nms != "off":
        emitted = [e for e in emitted if e[2] >= cfg.score_floor]
    return emitted


def suppress(
    dets: Sequence[Detection],
    cfg: SuppressConfig | None = None,
    *,
    per_class: bool = True,
) -> list[Detection]:
    """Run the full suppression pipeline over a multi-class detection list.

    Classes are processed independently (disable with ``per_class=False``
    for class-agnostic suppression; class ids are still preserved on the
    output). With voting enabled every detection must carry variances.
    Output is sorted by final score descending, ties by input order. Scores
    only ever decrease; with soft NMS active, detections whose decayed score
    drops below ``score_floor`` are pruned once the loop has finished.
    """
    cfg = cfg if cfg is not None else SuppressConfig()
    _validate_config(cfg)
    dets = check_detections(dets, require_var=cfg.voting)
    if not dets:
        return []

    if per_class:
        groups = sorted({d.class_id for d in dets})
        index_groups = [
            [i for i, d in enumerate(dets) if d.class_id == c] for c in groups
        ]
    else:
        index_groups = [list(range(len(dets)))]

    results: list[tuple[float, int, Detection]] = []
    for indices in index_groups:
        boxes = np.array([dets[i].box.as_tuple() for i in indices], dtype=float)
        scores = np.array([dets[i].score for i in indices], dtype=float)
        variances = (
            np.array([dets[i].var for i in indices], dtype=float)
            if cfg.voting
            else None
        )
        for local, box, score in _class_pipeline(boxes, scores, variances, cfg):
            orig = indices[local]
            det = replace(dets[orig], box=Box(*box), score=score)
            results.append((score, orig, det))

    results.sort(key=lambda r: (-r[0], r[1]))
    return [det for _, _, det in results]


class VarianceVotingSuppressor(TransformerMixin, BaseEstimator):
    """Stateless transformer wrapping :func:`suppress`.

    Parameters mirror :class:`SuppressConfig`; ``fit`` only validates them,
    so the class slots into sklearn pipelines and parameter searches.

    >>> sup = VarianceVotingSuppressor(voting=True, soft_nms="gaussian")
    >>> refined = sup.fit_transform(detections)   # doctest: +SKIP
    """

    def __init__(
        self,
        sigma_t: float = 0.02,
        soft_nms: str = "off",
        soft_sigma: float = 0.5,
        nms_iou_thresh: float = 0.5,
        score_floor: float = 0.001,
        voting: bool = False,
        vote_pool: str = "initial",
        per_class: bool = True,
    ):
        self.sigma_t = sigma_t
        self.soft_nms = soft_nms
        self.soft_sigma = soft_sigma
        self.nms_iou_thresh = nms_iou_thresh
        self.score_floor = score_floor
        self.voting = voting
        self.vote_pool = vote_pool
        self.per_class = per_class

    def _config(self) -> SuppressConfig:
        return SuppressConfig(
            sigma_t=self.sigma_t,
            soft_nms=self.soft_nms,
            soft_sigma=self.soft_sigma,
            nms_iou_thresh=self.nms_iou_thresh,
            score_floor=self.score_floor,
            voting=self.voting,
            vote_pool=self.vote_pool,
        )

    def fit(self, X=None, y=None):
        self._config()
        return self

    def transform(self, X: Sequence[Detection]) -> list[Detection]:
        return suppress(X, self._config(), per_class=self.per_class)
