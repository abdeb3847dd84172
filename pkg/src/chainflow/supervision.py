"""Ground-truth label assignment for anchor pairs and the training loss stack.

Each anchor is labeled positive/negative/ignore by IoU against the first
frame's ground truth; positives additionally carry an identity-verification
label saying whether the matched target persists into the second frame, plus
offset regression targets for both frames. Losses are smooth-L1 box
regression and focal classification/ID terms, with analytic gradients for
finite-difference verification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .anchors import Anchor, anchors_to_array
from .geometry import Box, OffsetQuad, boxes_to_array, iou_matrix

POSITIVE = 1
NEGATIVE = 0
IGNORE = -1

_P_CLAMP = 1e-7


@dataclass(frozen=True)
class GroundTruthFrame:
    """Annotated boxes of one frame: parallel identity and visibility lists."""

    frame: int
    boxes: list[Box]
    identities: list[int]
    visibilities: list[float]

    def __post_init__(self) -> None:
        if not (len(self.boxes) == len(self.identities) == len(self.visibilities)):
            raise ValueError("boxes, identities and visibilities must have equal length")
        if len(set(self.identities)) != len(self.identities):
            raise ValueError(f"duplicate identity in frame {self.frame}")

    def filtered(self, min_visibility: float) -> "GroundTruthFrame":
        """Copy with only the boxes whose visibility exceeds the threshold."""
        keep = [i for i, v in enumerate(self.visibilities) if v > min_visibility]
        return GroundTruthFrame(
            self.frame,
            [self.boxes[i] for i in keep],
            [self.identities[i] for i in keep],
            [self.visibilities[i] for i in keep],
        )


@dataclass(frozen=True)
class AssignmentParams:
    """IoU thresholds for the positive/negative/ignore partition."""

    t_pos: float = 0.5
    t_neg: float = 0.4
    min_visibility: float = 0.1

    def __post_init__(self) -> None:
        if not (0.0 <= self.t_neg < self.t_pos <= 1.0):
            raise ValueError("thresholds must satisfy 0 <= t_neg < t_pos <= 1")


@dataclass(frozen=True)
class LossWeights:
    """Weighting factors and focal parameters of the total loss."""

    alpha: float = 1.0
    beta: float = 1.0
    focal_gamma: float = 2.0
    focal_alpha: float = 0.25
    normalize_by_positives: bool = True

    def __post_init__(self) -> None:
        if min(self.alpha, self.beta, self.focal_gamma, self.focal_alpha) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass
class AnchorLabels:
    """Per-anchor assignment result.

    cls holds POSITIVE/NEGATIVE/IGNORE; gt_index / gt_index_t1 are matched
    ground-truth indices (-1 where absent); c_id is 1 where the matched
    identity persists into the second frame, 0 otherwise, and only
    meaningful on positives. target_t / target_t1 are encoded offsets;
    target_t1 rows are valid only where has_t1 is set.
    """

    cls: np.ndarray
    gt_index: np.ndarray
    gt_index_t1: np.ndarray
    c_id: np.ndarray
    target_t: np.ndarray
    target_t1: np.ndarray

    @property
    def has_t1(self) -> np.ndarray:
        return self.gt_index_t1 >= 0

    @property
    def n_anchors(self) -> int:
        return self.cls.shape[0]

    @property
    def positives(self) -> np.ndarray:
        return self.cls == POSITIVE


def encode_offsets_array(anchor_boxes: np.ndarray, gt_boxes: np.ndarray) -> np.ndarray:
    """Vectorized offset encoding of (N, 4) targets against (N, 4) anchors."""
    acx = anchor_boxes[:, 0] + 0.5 * anchor_boxes[:, 2]
    acy = anchor_boxes[:, 1] + 0.5 * anchor_boxes[:, 3]
    gcx = gt_boxes[:, 0] + 0.5 * gt_boxes[:, 2]
    gcy = gt_boxes[:, 1] + 0.5 * gt_boxes[:, 3]
    return np.stack(
        [
            (gcx - acx) / anchor_boxes[:, 2],
            (gcy - acy) / anchor_boxes[:, 3],
            np.log(gt_boxes[:, 2] / anchor_boxes[:, 2]),
            np.log(gt_boxes[:, 3] / anchor_boxes[:, 3]),
        ],
        axis=1,
    )


def assign_labels(
    anchors: list[Anchor],
    gt_t: GroundTruthFrame,
    gt_t1: GroundTruthFrame,
    p: AssignmentParams = AssignmentParams(),
) -> AnchorLabels:
    """Assign classification, ID and regression targets to every anchor.

    An anchor is positive when its best IoU against the first frame's boxes
    reaches t_pos, negative when below t_neg, and ignored in between. Every
    ground-truth box is additionally force-matched to its best anchor (ties
    broken toward the lowest anchor index) so no target goes unsupervised.
    Frames are filtered by visibility before matching.
    """
    if not anchors:
        raise ValueError("anchor list must not be empty")
    gt_t = gt_t.filtered(p.min_visibility)
    gt_t1 = gt_t1.filtered(p.min_visibility)

    n = len(anchors)
    anchor_arr = anchors_to_array(anchors)
    gt_arr = boxes_to_array(gt_t.boxes)

    cls = np.full(n, NEGATIVE, dtype=np.int8)
    gt_index = np.full(n, -1, dtype=np.int64)
    gt_index_t1 = np.full(n, -1, dtype=np.int64)
    c_id = np.zeros(n, dtype=np.int8)
    target_t = np.zeros((n, 4), dtype=np.float64)
    target_t1 = np.zeros((n, 4), dtype=np.float64)

    if gt_arr.shape[0] > 0:
        overlaps = iou_matrix(anchor_arr, gt_arr)
        best_gt = np.argmax(overlaps, axis=1)
        best_iou = overlaps[np.arange(n), best_gt]

        cls[best_iou >= p.t_pos] = POSITIVE
        between = (best_iou >= p.t_neg) & (best_iou < p.t_pos)
        cls[between] = IGNORE
        gt_index[cls == POSITIVE] = best_gt[cls == POSITIVE]

        # force-match each gt to its best anchor; on anchor collision, the
        # pairing with the higher IoU wins (ties toward the lower gt index)
        best_anchor = np.argmax(overlaps, axis=0)
        for j in range(gt_arr.shape[0]):
            a = int(best_anchor[j])
            if gt_index[a] >= 0 and gt_index[a] != j:
                if overlaps[a, gt_index[a]] >= overlaps[a, j]:
                    continue
            cls[a] = POSITIVE
            gt_index[a] = j

        pos = np.flatnonzero(cls == POSITIVE)
        if pos.size:
            ids_t1 = {identity: k for k, identity in enumerate(gt_t1.identities)}
            matched = gt_arr[gt_index[pos]]
            target_t[pos] = encode_offsets_array(anchor_arr[pos], matched)
            for a in pos:
                identity = gt_t.identities[gt_index[a]]
                k = ids_t1.get(identity)
                if k is not None:
                    gt_index_t1[a] = k
                    c_id[a] = 1
            with_t1 = np.flatnonzero(gt_index_t1 >= 0)
            if with_t1.size:
                t1_arr = boxes_to_array(gt_t1.boxes)[gt_index_t1[with_t1]]
                target_t1[with_t1] = encode_offsets_array(anchor_arr[with_t1], t1_arr)

    return AnchorLabels(cls, gt_index, gt_index_t1, c_id, target_t, target_t1)


def smooth_l1(x: float) -> float:
    """Smooth L1 penalty: quadratic inside |x| < 1, linear beyond."""
    ax = abs(x)
    if ax < 1.0:
        return 0.5 * x * x
    return ax - 0.5


def smooth_l1_grad(x: float) -> float:
    """Derivative of :func:`smooth_l1`."""
    if abs(x) < 1.0:
        return x
    return math.copysign(1.0, x)


def _smooth_l1_arr(x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    return np.where(ax < 1.0, 0.5 * x * x, ax - 0.5)


def _smooth_l1_grad_arr(x: np.ndarray) -> np.ndarray:
    return np.where(np.abs(x) < 1.0, x, np.sign(x))


def reg_loss(
    pred_t: OffsetQuad,
    pred_t1: OffsetQuad,
    target_t: OffsetQuad,
    target_t1: OffsetQuad,
) -> float:
    """Paired-box regression loss: mean smooth-L1 over the 8 offset residuals."""
    total = 0.0
    for pred, target in ((pred_t, target_t), (pred_t1, target_t1)):
        for pv, tv in zip(pred.as_tuple(), target.as_tuple()):
            total += smooth_l1(pv - tv)
    return total / 8.0


def focal_loss(p: float, c: int, w: LossWeights = LossWeights()) -> float:
    """Focal binary cross-entropy for one prediction; p is clamped away from 0/1."""
    p = min(max(p, _P_CLAMP), 1.0 - _P_CLAMP)
    if c == 1:
        return -w.focal_alpha * (1.0 - p) ** w.focal_gamma * math.log(p)
    return -(1.0 - w.focal_alpha) * p**w.focal_gamma * math.log(1.0 - p)


def focal_loss_grad(p: float, c: int, w: LossWeights = LossWeights()) -> float:
    """Derivative of :func:`focal_loss` with respect to p (zero outside the clamp)."""
    if p <= _P_CLAMP or p >= 1.0 - _P_CLAMP:
        return 0.0
    g = w.focal_gamma
    if c == 1:
        return w.focal_alpha * (g * (1.0 - p) ** (g - 1.0) * math.log(p) - (1.0 - p) ** g / p)
    return (1.0 - w.focal_alpha) * (p**g / (1.0 - p) - g * p ** (g - 1.0) * math.log(1.0 - p))


@dataclass
class Predictions:
    """Per-anchor predictions aligned index-wise with :class:`AnchorLabels`."""

    p_cls: np.ndarray
    p_id: np.ndarray
    offsets_t: np.ndarray
    offsets_t1: np.ndarray

    def __post_init__(self) -> None:
        n = self.p_cls.shape[0]
        if not (
            self.p_id.shape == (n,)
            and self.offsets_t.shape == (n, 4)
            and self.offsets_t1.shape == (n, 4)
        ):
            raise ValueError("prediction arrays are not aligned")

    def copy(self) -> "Predictions":
        return Predictions(
            self.p_cls.copy(), self.p_id.copy(), self.offsets_t.copy(), self.offsets_t1.copy()
        )


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    reg: float
    cls: float
    id_verification: float


def _focal_terms(p: np.ndarray, c: np.ndarray, w: LossWeights) -> np.ndarray:
    pc = np.clip(p, _P_CLAMP, 1.0 - _P_CLAMP)
    pos = -w.focal_alpha * (1.0 - pc) ** w.focal_gamma * np.log(pc)
    neg = -(1.0 - w.focal_alpha) * pc**w.focal_gamma * np.log(1.0 - pc)
    return np.where(c == 1, pos, neg)


def _focal_grad_terms(p: np.ndarray, c: np.ndarray, w: LossWeights) -> np.ndarray:
    inside = (p > _P_CLAMP) & (p < 1.0 - _P_CLAMP)
    pc = np.clip(p, _P_CLAMP, 1.0 - _P_CLAMP)
    g = w.focal_gamma
    pos = w.focal_alpha * (g * (1.0 - pc) ** (g - 1.0) * np.log(pc) - (1.0 - pc) ** g / pc)
    neg = (1.0 - w.focal_alpha) * (pc**g / (1.0 - pc) - g * pc ** (g - 1.0) * np.log(1.0 - pc))
    return np.where(c == 1, pos, neg) * inside


def total_loss(
    pred: Predictions, labels: AnchorLabels, w: LossWeights = LossWeights()
) -> LossBreakdown:
    """Total training loss: regression over positives, focal classification
    over positives and negatives, focal ID verification over positives.

    Positives whose target is absent from the second frame contribute only
    the first-frame regression half (4 residuals instead of 8). When
    normalize_by_positives is set, the classification term is divided by the
    positive count (minimum 1).
    """
    if pred.p_cls.shape[0] != labels.n_anchors:
        raise ValueError("predictions and labels differ in length")
    pos = labels.positives
    n_pos = int(np.count_nonzero(pos))

    reg_total = 0.0
    if n_pos:
        res_t = _smooth_l1_arr(pred.offsets_t[pos] - labels.target_t[pos]).sum(axis=1)
        both = labels.has_t1[pos]
        res_t1 = _smooth_l1_arr(
            pred.offsets_t1[pos] - labels.target_t1[pos]
        ).sum(axis=1)
        per_anchor = np.where(both, (res_t + res_t1) / 8.0, res_t / 4.0)
        reg_total = float(per_anchor.sum())

    scored = labels.cls != IGNORE
    cls_terms = _focal_terms(pred.p_cls[scored], (labels.cls[scored] == POSITIVE).astype(np.int8), w)
    cls_total = float(cls_terms.sum())
    if w.normalize_by_positives:
        cls_total /= max(1, n_pos)
    cls_total *= w.alpha

    id_terms = _focal_terms(pred.p_id[pos], labels.c_id[pos], w)
    id_total = float(id_terms.sum()) * w.beta

    return LossBreakdown(reg_total + cls_total + id_total, reg_total, cls_total, id_total)


def loss_gradients(
    pred: Predictions, labels: AnchorLabels, w: LossWeights = LossWeights()
) -> Predictions:
    """Analytic partial derivatives of :func:`total_loss` w.r.t. every prediction."""
    if pred.p_cls.shape[0] != labels.n_anchors:
        raise ValueError("predictions and labels differ in length")
    n = labels.n_anchors
    g_cls = np.zeros(n)
    g_id = np.zeros(n)
    g_off_t = np.zeros((n, 4))
    g_off_t1 = np.zeros((n, 4))

    pos = labels.positives
    n_pos = int(np.count_nonzero(pos))
    if n_pos:
        both = labels.has_t1[pos]
        denom = np.where(both, 8.0, 4.0)[:, None]
        g_off_t[pos] = _smooth_l1_grad_arr(pred.offsets_t[pos] - labels.target_t[pos]) / denom
        g_t1 = _smooth_l1_grad_arr(pred.offsets_t1[pos] - labels.target_t1[pos]) / 8.0
        g_off_t1[pos] = g_t1 * both[:, None]

    scored = labels.cls != IGNORE
    cls_grad = _focal_grad_terms(
        pred.p_cls[scored], (labels.cls[scored] == POSITIVE).astype(np.int8), w
    )
    norm = max(1, n_pos) if w.normalize_by_positives else 1
    g_cls[scored] = w.alpha * cls_grad / norm

    g_id[pos] = w.beta * _focal_grad_terms(pred.p_id[pos], labels.c_id[pos], w)

    return Predictions(g_cls, g_id, g_off_t, g_off_t1)


def _random_instance(
    rng: np.random.Generator, n_anchors: int = 6
) -> tuple[Predictions, AnchorLabels]:
    """Random loss instance with residuals kept away from the smooth-L1 kink
    and probabilities away from the clamp, so finite differences are stable."""
    cls = rng.choice([POSITIVE, NEGATIVE, IGNORE], size=n_anchors, p=[0.5, 0.3, 0.2]).astype(
        np.int8
    )
    if not np.any(cls == POSITIVE):
        cls[0] = POSITIVE
    pos = cls == POSITIVE
    c_id = np.where(pos, rng.integers(0, 2, size=n_anchors), 0).astype(np.int8)
    gt_index = np.where(pos, 0, -1).astype(np.int64)
    gt_index_t1 = np.where(pos & (c_id == 1), 0, -1).astype(np.int64)

    target_t = rng.uniform(-0.5, 0.5, size=(n_anchors, 4))
    target_t1 = rng.uniform(-0.5, 0.5, size=(n_anchors, 4))
    residual = rng.uniform(0.1, 0.8, size=(n_anchors, 4)) * rng.choice([-1, 1], size=(n_anchors, 4))
    residual_t1 = rng.uniform(0.1, 0.8, size=(n_anchors, 4)) * rng.choice(
        [-1, 1], size=(n_anchors, 4)
    )
    pred = Predictions(
        rng.uniform(0.2, 0.8, size=n_anchors),
        rng.uniform(0.2, 0.8, size=n_anchors),
        target_t + residual,
        target_t1 + residual_t1,
    )
    labels = AnchorLabels(cls, gt_index, gt_index_t1, c_id, target_t, target_t1)
    return pred, labels


def gradient_check(
    seed: int = 0,
    n_instances: int = 100,
    step: float = 1e-5,
    tolerance: float = 1e-5,
) -> tuple[float, bool]:
    """Compare analytic gradients with central finite differences.

    Returns the worst relative error over all prediction scalars of all
    instances and whether it stays below the tolerance.
    """
    rng = np.random.default_rng(seed)
    w = LossWeights()
    worst = 0.0

    def loss_of(pred: Predictions, labels: AnchorLabels) -> float:
        return total_loss(pred, labels, w).total

    for _ in range(n_instances):
        pred, labels = _random_instance(rng)
        grad = loss_gradients(pred, labels, w)
        for arr, garr in (
            (pred.p_cls, grad.p_cls),
            (pred.p_id, grad.p_id),
            (pred.offsets_t, grad.offsets_t),
            (pred.offsets_t1, grad.offsets_t1),
        ):
            flat = arr.reshape(-1)
            gflat = garr.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + step
                hi = loss_of(pred, labels)
                flat[i] = orig - step
                lo = loss_of(pred, labels)
                flat[i] = orig
                fd = (hi - lo) / (2.0 * step)
                scale = max(abs(gflat[i]), abs(fd))
                if scale < 1e-12:
                    continue
                worst = max(worst, abs(gflat[i] - fd) / scale)
    return worst, worst < tolerance
