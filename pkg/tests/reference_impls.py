"""Independent straight-line reference implementations used as test oracles.

Everything here is deliberately written scalar-first (plain floats, plain
lists, explicit loops) and shares no code with the package under test. The
suppression oracle is a line-for-line transcription of the greedy
select/decay/vote loop; the metric oracles follow the textbook definitions
directly.
"""

from __future__ import annotations

import math


def iou_ref(a, b):
    """IoU between two (x1, y1, x2, y2) tuples, continuous coordinates."""
    ix1 = max(a[0], b[0])
    iy1 = max(a[1], b[1])
    ix2 = min(a[2], b[2])
    iy2 = min(a[3], b[3])
    iw = max(0.0, ix2 - ix1)
    ih = max(0.0, iy2 - iy1)
    inter = iw * ih
    area_a = max(0.0, a[2] - a[0]) * max(0.0, a[3] - a[1])
    area_b = max(0.0, b[2] - b[0]) * max(0.0, b[3] - b[1])
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def hard_nms_ref(boxes, scores, thresh):
    """Brute-force greedy NMS. Returns surviving indices, score-descending."""
    remaining = list(range(len(boxes)))
    keep = []
    while remaining:
        best = remaining[0]
        for i in remaining[1:]:
            if scores[i] > scores[best]:
                best = i
        keep.append(best)
        remaining = [
            i
            for i in remaining
            if i != best and iou_ref(boxes[i], boxes[best]) <= thresh
        ]
    return keep


def vote_ref(selected_box, boxes, variances, sigma_t):
    """Direct per-coordinate weighted mean over overlapping boxes.

    Weight of box i on coordinate k is
    exp(-(1 - IoU(box_i, selected))^2 / sigma_t) / var_i[k]; only boxes with
    IoU(box_i, selected) > 0 participate.
    """
    voted = [0.0, 0.0, 0.0, 0.0]
    for k in range(4):
        num = 0.0
        den = 0.0
        for i in range(len(boxes)):
            overlap = iou_ref(boxes[i], selected_box)
            if overlap > 0.0:
                p = math.exp(-((1.0 - overlap) ** 2) / sigma_t)
                num += p * boxes[i][k] / variances[i][k]
                den += p / variances[i][k]
        if den == 0.0:
            raise ZeroDivisionError("no overlapping neighbors")
        voted[k] = num / den
    return tuple(voted)


def suppress_ref(
    boxes,
    scores,
    variances,
    *,
    sigma_t=0.02,
    soft_mode="off",
    soft_sigma=0.5,
    iou_thresh=0.5,
    score_floor=0.001,
    voting=False,
    vote_pool="initial",
):
    """Straight-line transcription of the greedy suppression loop.

    Single-class input. Returns a list of (original_index, box, score)
    sorted by final score descending (ties: lower original index first).
    """
    n = len(boxes)
    work_scores = list(scores)
    alive = list(range(n))  # the set T, original coordinates throughout
    emitted = []

    while alive:
        m = alive[0]
        for i in alive[1:]:
            if work_scores[i] > work_scores[m]:
                m = i
        alive.remove(m)

        if soft_mode == "off":
            alive = [i for i in alive if iou_ref(boxes[i], boxes[m]) <= iou_thresh]
        else:
            for i in alive:
                overlap = iou_ref(boxes[i], boxes[m])
                if soft_mode == "linear":
                    if overlap > iou_thresh:
                        work_scores[i] = work_scores[i] * (1.0 - overlap)
                elif soft_mode == "gaussian":
                    work_scores[i] = work_scores[i] * math.exp(
                        -(overlap * overlap) / soft_sigma
                    )
                else:
                    raise ValueError(soft_mode)

        out_box = boxes[m]
        if voting:
            if vote_pool == "initial":
                pool = list(range(n))
            else:
                pool = [m] + alive
            num = [0.0, 0.0, 0.0, 0.0]
            den = [0.0, 0.0, 0.0, 0.0]
            for i in pool:
                overlap = iou_ref(boxes[i], boxes[m])
                if overlap > 0.0:
                    p = math.exp(-((1.0 - overlap) ** 2) / sigma_t)
                    for k in range(4):
                        num[k] += p * boxes[i][k] / variances[i][k]
                        den[k] += p / variances[i][k]
            out_box = tuple(num[k] / den[k] for k in range(4))

        emitted.append((m, out_box, work_scores[m]))

    if soft_mode != "off":
        emitted = [e for e in emitted if e[2] >= score_floor]

    emitted.sort(key=lambda e: (-e[2], e[0]))
    return emitted


def match_ref(det_boxes, det_scores, gt_boxes, iou_thresh):
    """Greedy matcher: detections score-descending (ties: input order), each
    takes the highest-IoU unmatched ground truth with IoU >= thresh (ties:
    lower ground-truth index). Returns {det_index: gt_index} for matches.
    """
    order = sorted(range(len(det_boxes)), key=lambda i: (-det_scores[i], i))
    taken = set()
    assignment = {}
    for d in order:
        best_gt = None
        best_iou = -1.0
        for g in range(len(gt_boxes)):
            if g in taken:
                continue
            overlap = iou_ref(det_boxes[d], gt_boxes[g])
            if overlap >= iou_thresh and overlap > best_iou:
                best_iou = overlap
                best_gt = g
        if best_gt is not None:
            taken.add(best_gt)
            assignment[d] = best_gt
    return assignment


def ap_101_ref(scored_flags, n_gt):
    """101-point interpolated average precision from (score, is_tp) pairs.

    Sorts by score descending (stable), builds the precision/recall curve,
    applies the running-max-from-the-right envelope, then averages the
    envelope sampled at recalls 0.00, 0.01, ..., 1.00.
    """
    if n_gt <= 0:
        raise ValueError("n_gt must be positive")
    ranked = sorted(range(len(scored_flags)), key=lambda i: (-scored_flags[i][0], i))
    tp = 0
    fp = 0
    precisions = []
    recalls = []
    for i in ranked:
        if scored_flags[i][1]:
            tp += 1
        else:
            fp += 1
        precisions.append(tp / (tp + fp))
        recalls.append(tp / n_gt)
    for i in range(len(precisions) - 2, -1, -1):
        precisions[i] = max(precisions[i], precisions[i + 1])
    total = 0.0
    for step in range(101):
        r = step / 100.0
        p_at_r = 0.0
        for prec, rec in zip(precisions, recalls):
            if rec >= r - 1e-12:
                p_at_r = prec
                break
        total += p_at_r
    return total / 101.0


def central_difference(f, x, h=1e-6):
    """Central finite-difference derivative of a scalar function."""
    return (f(x + h) - f(x - h)) / (2.0 * h)
