"""Anchor scale selection and dense grid construction over pyramid levels.

Scales are chosen by 1-D k-means over per-box scale sqrt(w*h); a single
aspect ratio is shared by all levels, so each grid cell carries exactly one
anchor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Box

DEFAULT_SCALES = (38.0, 86.0, 112.0, 156.0, 328.0)
DEFAULT_RATIO = 2.9
DEFAULT_STRIDES = (4, 8, 16, 32, 64)
DEFAULT_LEVELS = (2, 3, 4, 5, 6)


@dataclass(frozen=True)
class Anchor:
    """Grid-placed prior box from which paired boxes are decoded."""

    cx: float
    cy: float
    w: float
    h: float
    level: int

    def as_box(self) -> Box:
        return Box.from_cxcywh(self.cx, self.cy, self.w, self.h)


@dataclass(frozen=True)
class AnchorConfig:
    """Per-level anchor layout: one scale per pyramid level, shared aspect ratio."""

    image_w: int
    image_h: int
    scales: tuple[float, ...] = DEFAULT_SCALES
    ratio: float = DEFAULT_RATIO
    strides: tuple[int, ...] = DEFAULT_STRIDES
    levels: tuple[int, ...] = field(default=DEFAULT_LEVELS)

    def __post_init__(self) -> None:
        if self.image_w <= 0 or self.image_h <= 0:
            raise ValueError("image dimensions must be positive")
        if self.ratio <= 0:
            raise ValueError("aspect ratio must be positive")
        if not (len(self.scales) == len(self.strides) == len(self.levels)):
            raise ValueError("scales, strides and levels must align one-to-one")
        if any(s2 <= s1 for s1, s2 in zip(self.scales, self.scales[1:])):
            raise ValueError("scales must be strictly increasing")
        if any(s <= 0 for s in self.strides):
            raise ValueError("strides must be positive")


def box_scales(boxes: list[Box]) -> np.ndarray:
    """Scalar scale sqrt(w*h) for each box."""
    return np.array([math.sqrt(b.w * b.h) for b in boxes], dtype=np.float64)


def kmeans_scales(
    gt_boxes: list[Box],
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> list[float]:
    """Cluster box scales with 1-D Lloyd's k-means and return sorted centroids.

    Initialization uses k evenly spaced quantiles of the scale distribution,
    so the result is deterministic for any fixed seed and invariant to input
    ordering. The seed parameter is accepted for interface stability; the
    quantile initialization makes the outcome independent of it.
    """
    del seed  # deterministic initialization; kept for a stable call signature
    if k < 1:
        raise ValueError("k must be at least 1")
    if not gt_boxes:
        raise ValueError("cannot cluster an empty box list")
    scales = box_scales(gt_boxes)
    distinct = np.unique(scales)
    if k > distinct.size:
        raise ValueError(f"k={k} exceeds the {distinct.size} distinct scale values")

    quantiles = (np.arange(k) + 0.5) / k
    centroids = np.quantile(scales, quantiles)

    for _ in range(max_iter):
        assign = np.argmin(np.abs(scales[:, None] - centroids[None, :]), axis=1)
        new = centroids.copy()
        for j in range(k):
            members = scales[assign == j]
            if members.size:
                new[j] = members.mean()
            else:
                # reseat an empty cluster on the point its centroid fits worst
                worst = int(np.argmax(np.abs(scales - centroids[assign])))
                new[j] = scales[worst]
        shift = float(np.max(np.abs(new - centroids)))
        centroids = new
        if shift < tol:
            break
    return sorted(float(c) for c in centroids)


def build_anchor_grid(cfg: AnchorConfig) -> list[Anchor]:
    """Place one anchor per grid cell on every pyramid level.

    Cell (i, j) on a level with stride s gets an anchor centered at
    (s*(i+0.5), s*(j+0.5)); anchor size satisfies w*h = scale**2 and
    h/w = ratio. Anchors overhanging the image border are kept unclipped.
    """
    anchors: list[Anchor] = []
    sqrt_ratio = math.sqrt(cfg.ratio)
    for scale, stride, level in zip(cfg.scales, cfg.strides, cfg.levels):
        w = scale / sqrt_ratio
        h = scale * sqrt_ratio
        nx = math.ceil(cfg.image_w / stride)
        ny = math.ceil(cfg.image_h / stride)
        for j in range(ny):
            cy = stride * (j + 0.5)
            for i in range(nx):
                anchors.append(Anchor(stride * (i + 0.5), cy, w, h, level))
    return anchors


def anchors_to_array(anchors: list[Anchor]) -> np.ndarray:
    """Stack anchors into an (N, 4) array of (x, y, w, h) box rows."""
    if not anchors:
        return np.zeros((0, 4), dtype=np.float64)
    out = np.empty((len(anchors), 4), dtype=np.float64)
    for i, a in enumerate(anchors):
        out[i, 0] = a.cx - 0.5 * a.w
        out[i, 1] = a.cy - 0.5 * a.h
        out[i, 2] = a.w
        out[i, 3] = a.h
    return out
