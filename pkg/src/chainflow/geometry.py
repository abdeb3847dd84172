"""Axis-aligned box arithmetic: overlap measures and anchor offset coding.

Boxes are stored as (left, top, width, height) in pixels, matching the
MOTChallenge file convention. Center/size views are computed on demand for
the offset parameterization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in pixel units; width and height must be positive."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"box field {name!r} must be finite, got {v!r}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box size must be positive, got w={self.w}, h={self.h}")

    @property
    def cx(self) -> float:
        return self.x + 0.5 * self.w

    @property
    def cy(self) -> float:
        return self.y + 0.5 * self.h

    @property
    def right(self) -> float:
        return self.x + self.w

    @property
    def bottom(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    @classmethod
    def from_cxcywh(cls, cx: float, cy: float, w: float, h: float) -> "Box":
        return cls(cx - 0.5 * w, cy - 0.5 * h, w, h)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class OffsetQuad:
    """Dimensionless box offsets: center deltas (dx, dy) and log-scale deltas (dw, dh)."""

    dx: float
    dy: float
    dw: float
    dh: float

    def __post_init__(self) -> None:
        for name in ("dx", "dy", "dw", "dh"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"offset field {name!r} must be finite, got {v!r}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.dx, self.dy, self.dw, self.dh)


def intersection_area(a: Box, b: Box) -> float:
    """Overlap area of two boxes; 0.0 when they are disjoint."""
    iw = min(a.right, b.right) - max(a.x, b.x)
    ih = min(a.bottom, b.bottom) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def iou(a: Box, b: Box) -> float:
    """Intersection over union, in [0, 1]."""
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    return inter / (a.area + b.area - inter)


def iom(a: Box, b: Box) -> float:
    """Intersection over the smaller box's area, in [0, 1]."""
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    return inter / min(a.area, b.area)


def encode_offsets(anchor: Box, gt: Box) -> OffsetQuad:
    """Encode a target box as offsets relative to an anchor box.

    Center deltas are normalized by the anchor size, scale deltas are log
    ratios: dx=(cx_g-cx_a)/w_a, dy=(cy_g-cy_a)/h_a, dw=ln(w_g/w_a),
    dh=ln(h_g/h_a).
    """
    return OffsetQuad(
        (gt.cx - anchor.cx) / anchor.w,
        (gt.cy - anchor.cy) / anchor.h,
        math.log(gt.w / anchor.w),
        math.log(gt.h / anchor.h),
    )


def decode_offsets(anchor: Box, d: OffsetQuad) -> Box:
    """Apply offsets to an anchor box; exact inverse of :func:`encode_offsets`."""
    return Box.from_cxcywh(
        d.dx * anchor.w + anchor.cx,
        d.dy * anchor.h + anchor.cy,
        anchor.w * math.exp(d.dw),
        anchor.h * math.exp(d.dh),
    )


def boxes_to_array(boxes: list[Box] | tuple[Box, ...]) -> np.ndarray:
    """Stack boxes into an (N, 4) float array of (x, y, w, h) rows."""
    if not boxes:
        return np.zeros((0, 4), dtype=np.float64)
    return np.array([b.as_tuple() for b in boxes], dtype=np.float64)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between (N, 4) and (M, 4) arrays of (x, y, w, h) boxes."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((a.shape[0], b.shape[0]), dtype=np.float64)
    ax1, ay1 = a[:, 0], a[:, 1]
    ax2, ay2 = a[:, 0] + a[:, 2], a[:, 1] + a[:, 3]
    bx1, by1 = b[:, 0], b[:, 1]
    bx2, by2 = b[:, 0] + b[:, 2], b[:, 1] + b[:, 3]

    iw = np.minimum(ax2[:, None], bx2[None, :]) - np.maximum(ax1[:, None], bx1[None, :])
    ih = np.minimum(ay2[:, None], by2[None, :]) - np.maximum(ay1[:, None], by1[None, :])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)

    area_a = (a[:, 2] * a[:, 3])[:, None]
    area_b = (b[:, 2] * b[:, 3])[None, :]
    union = area_a + area_b - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=inter > 0)
    return out
