"""Axis-aligned box geometry: IoU and anchor-relative boundary offsets.

Boxes are kept in boundary form (x1, y1, x2, y2) throughout; (x, y, w, h)
exists only as an input conversion. Coordinates are continuous, so width is
``x2 - x1`` with no one-pixel correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Box",
    "Anchor",
    "BoxOffsets",
    "iou",
    "iou_matrix",
    "encode_offsets",
    "decode_offsets",
    "clamp_box",
]


def _require_finite(kind: str, *coords: float) -> None:
    for c in coords:
        if not math.isfinite(c):
            raise ValueError(f"{kind} coordinates must be finite, got {c!r}")


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in boundary coordinates, pixels.

    Construction requires finite coordinates. Ordering (x1 <= x2, y1 <= y2)
    is expected but not enforced: offset decoding can legitimately produce
    crossed boundaries, which are surfaced through :attr:`is_crossed` instead
    of being silently repaired.
    """

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        for name in ("x1", "y1", "x2", "y2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        _require_finite("box", self.x1, self.y1, self.x2, self.y2)

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float) -> "Box":
        """Build from a top-left corner plus width/height."""
        return cls(x, y, x + w, y + h)

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        """Rectangle area; crossed boundaries contribute zero extent."""
        return max(self.width, 0.0) * max(self.height, 0.0)

    @property
    def is_crossed(self) -> bool:
        """True when a predicted boundary pair is out of order."""
        return self.x1 > self.x2 or self.y1 > self.y2

    def ordered(self) -> "Box":
        """Reorder crossed boundaries into a valid box."""
        return Box(
            min(self.x1, self.x2),
            min(self.y1, self.y2),
            max(self.x1, self.x2),
            max(self.y1, self.y2),
        )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


@dataclass(frozen=True)
class Anchor:
    """Reference box for offset coding; must have positive width and height."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        for name in ("x1", "y1", "x2", "y2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        _require_finite("anchor", self.x1, self.y1, self.x2, self.y2)
        if self.width <= 0.0 or self.height <= 0.0:
            raise ValueError(
                f"anchor must have positive extent, got w={self.width}, h={self.height}"
            )

    @classmethod
    def from_box(cls, box: Box) -> "Anchor":
        return cls(box.x1, box.y1, box.x2, box.y2)

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    def as_box(self) -> Box:
        return Box(self.x1, self.y1, self.x2, self.y2)


@dataclass(frozen=True)
class BoxOffsets:
    """Anchor-normalized boundary offsets (dimensionless)."""

    tx1: float
    ty1: float
    tx2: float
    ty2: float

    def __post_init__(self) -> None:
        for name in ("tx1", "ty1", "tx2", "ty2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        _require_finite("offset", self.tx1, self.ty1, self.tx2, self.ty2)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.tx1, self.ty1, self.tx2, self.ty2)


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two valid boxes, in [0, 1].

    Returns 0 when the union has zero area (both boxes degenerate).
    """
    ix1 = max(a.x1, b.x1)
    iy1 = max(a.y1, b.y1)
    ix2 = min(a.x2, b.x2)
    iy2 = min(a.y2, b.y2)
    inter = max(0.0, ix2 - ix1) * max(0.0, iy2 - iy1)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between two (N, 4) / (M, 4) arrays of xyxy boxes."""
    a = np.asarray(a, dtype=float).reshape(-1, 4)
    b = np.asarray(b, dtype=float).reshape(-1, 4)
    lt = np.maximum(a[:, None, :2], b[None, :, :2])
    rb = np.minimum(a[:, None, 2:], b[None, :, 2:])
    wh = np.clip(rb - lt, 0.0, None)
    inter = wh[..., 0] * wh[..., 1]
    area_a = np.clip(a[:, 2] - a[:, 0], 0.0, None) * np.clip(a[:, 3] - a[:, 1], 0.0, None)
    area_b = np.clip(b[:, 2] - b[:, 0], 0.0, None) * np.clip(b[:, 3] - b[:, 1], 0.0, None)
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0.0)
    return out


def encode_offsets(box: Box, anchor: Anchor) -> BoxOffsets:
    """Express box boundaries as offsets normalized by the anchor extent.

    Each boundary is coded independently: x-boundaries relative to the
    matching anchor x-boundary divided by anchor width, y-boundaries by
    anchor height.
    """
    return BoxOffsets(
        (box.x1 - anchor.x1) / anchor.width,
        (box.y1 - anchor.y1) / anchor.height,
        (box.x2 - anchor.x2) / anchor.width,
        (box.y2 - anchor.y2) / anchor.height,
    )


def decode_offsets(offsets: BoxOffsets, anchor: Anchor) -> Box:
    """Exact algebraic inverse of :func:`encode_offsets`.

    The result may have crossed boundaries (``box.is_crossed``); no clamping
    or reordering is applied here so downstream voting sees raw coordinates.
    """
    return Box(
        anchor.x1 + offsets.tx1 * anchor.width,
        anchor.y1 + offsets.ty1 * anchor.height,
        anchor.x2 + offsets.tx2 * anchor.width,
        anchor.y2 + offsets.ty2 * anchor.height,
    )


def clamp_box(box: Box, width: float, height: float) -> Box:
    """Reorder crossed boundaries, then clip to the image [0,w] x [0,h]."""
    b = box.ordered()
    return Box(
        min(max(b.x1, 0.0), width),
        min(max(b.y1, 0.0), height),
        min(max(b.x2, 0.0), width),
        min(max(b.y2, 0.0), height),
    )
