"""Inference-side glue between raw paired predictions and chaining.

Covers the multiplicative attention combination of score maps, linear
soft-NMS over box pairs (keyed on the first box of each pair only), and
confidence filtering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Box, iou


@dataclass(frozen=True)
class BoxPair:
    """Two boxes of one target in adjacent frames plus its two scores."""

    first: Box
    second: Box
    cls_score: float
    id_score: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.cls_score <= 1.0 and 0.0 <= self.id_score <= 1.0):
            raise ValueError(
                f"scores must lie in [0, 1], got cls={self.cls_score}, id={self.id_score}"
            )

    def with_cls_score(self, score: float) -> "BoxPair":
        return BoxPair(self.first, self.second, score, self.id_score)


@dataclass(frozen=True)
class ScoreGrid:
    """Dense per-cell scalars of shape (height, width, channels)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.ndim != 3:
            raise ValueError(f"score grid must be 3-D (h, w, c), got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("score grid values must be finite")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


def joint_attention(features: ScoreGrid, cls_map: ScoreGrid, id_map: ScoreGrid) -> ScoreGrid:
    """Modulate features by the product of the two single-channel confidence maps.

    The attention map cls*id is broadcast across all feature channels.
    """
    for name, grid in (("cls_map", cls_map), ("id_map", id_map)):
        if grid.channels != 1:
            raise ValueError(f"{name} must be single-channel, got {grid.channels}")
        if (grid.height, grid.width) != (features.height, features.width):
            raise ValueError(f"{name} spatial size differs from features")
    attention = cls_map.values[:, :, 0] * id_map.values[:, :, 0]
    return ScoreGrid(features.values * attention[:, :, None])


def soft_nms(pairs: list[BoxPair], nms_thresh: float = 0.7) -> list[BoxPair]:
    """Linear soft-NMS over pairs, suppressing by first-box IoU only.

    Greedy highest-score-first: each selection decays the classification
    score of every remaining pair whose first box overlaps the selected
    first box by more than nms_thresh, multiplying it by (1 - IoU). All
    pairs are returned with their decayed scores, best first; no pair is
    removed and no box is modified.
    """
    scores = [p.cls_score for p in pairs]
    remaining = list(range(len(pairs)))
    order: list[int] = []
    while remaining:
        best = max(remaining, key=lambda i: (scores[i], -i))
        remaining.remove(best)
        order.append(best)
        for i in remaining:
            overlap = iou(pairs[best].first, pairs[i].first)
            if overlap > nms_thresh:
                scores[i] *= 1.0 - overlap
    return [pairs[i].with_cls_score(scores[i]) for i in order]


def filter_confidence(pairs: list[BoxPair], conf_thresh: float = 0.4) -> list[BoxPair]:
    """Keep pairs whose classification score reaches the threshold (inclusive)."""
    return [p for p in pairs if p.cls_score >= conf_thresh]
