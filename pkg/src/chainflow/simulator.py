"""Deterministic synthetic world standing in for the detection network.

Generates ground-truth trajectories, corrupts them into per-node box-pair
detections (jitter, drops, false positives), and provides the geometric and
temporal training augmentations that operate purely on box annotations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chaining import Node
from .geometry import Box, iom, iou
from .postprocess import BoxPair
from .supervision import GroundTruthFrame


@dataclass(frozen=True)
class OcclusionEpisode:
    """Frames [start, start + duration) in which one target is invisible."""

    identity: int
    start: int
    duration: int

    def __post_init__(self) -> None:
        if self.duration < 0:
            raise ValueError("occlusion duration must be non-negative")

    def covers(self, frame: int) -> bool:
        return self.start <= frame < self.start + self.duration


@dataclass(frozen=True)
class WorldConfig:
    """Synthetic scene layout and motion model.

    With keep_in_view set (the default), spawn positions and speeds are
    chosen so every target's straight-line path stays inside the image for
    the rest of the sequence; targets then only vanish through exit_prob or
    occlusion episodes. With it cleared, targets roam freely and are
    clipped at the border until fully outside, then removed for good.
    """

    frames: int
    image_w: int = 1920
    image_h: int = 1080
    n_targets: int = 8
    entry_prob: float = 0.0
    exit_prob: float = 0.0
    occlusions: tuple[OcclusionEpisode, ...] = ()
    speed_range: tuple[float, float] = (1.0, 4.0)
    width_range: tuple[float, float] = (40.0, 90.0)
    height_range: tuple[float, float] = (90.0, 200.0)
    motion_jitter_std: float = 0.0
    keep_in_view: bool = True

    def __post_init__(self) -> None:
        if self.frames < 1:
            raise ValueError("need at least one frame")
        if self.image_w <= 0 or self.image_h <= 0:
            raise ValueError("image dimensions must be positive")
        if self.n_targets < 0:
            raise ValueError("target count must be non-negative")
        for name in ("entry_prob", "exit_prob"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.motion_jitter_std < 0:
            raise ValueError("jitter std must be non-negative")


@dataclass(frozen=True)
class NoiseConfig:
    """Detection corruption model applied on top of the ground truth."""

    center_jitter_std: float = 0.0
    size_jitter_std: float = 0.0
    drop_prob: float = 0.0
    false_positive_rate: float = 0.0
    min_visibility: float = 0.1
    true_cls_range: tuple[float, float] = (1.0, 1.0)
    true_id_range: tuple[float, float] = (1.0, 1.0)
    false_cls_range: tuple[float, float] = (0.5, 1.0)
    false_id_range: tuple[float, float] = (0.0, 0.3)

    def __post_init__(self) -> None:
        if self.center_jitter_std < 0 or self.size_jitter_std < 0:
            raise ValueError("jitter stds must be non-negative")
        if not (0.0 <= self.drop_prob <= 1.0):
            raise ValueError("drop_prob must lie in [0, 1]")
        if self.false_positive_rate < 0:
            raise ValueError("false_positive_rate must be non-negative")
        for name in ("true_cls_range", "true_id_range", "false_cls_range", "false_id_range"):
            lo, hi = getattr(self, name)
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError(f"{name} must be an ordered range inside [0, 1]")


@dataclass
class _Target:
    identity: int
    x: float
    y: float
    w: float
    h: float
    vx: float
    vy: float
    alive: bool = True


def _clip_to_image(t: _Target, w: int, h: int) -> tuple[Box, float] | None:
    """Clip a target's box to the image; None once it is fully outside."""
    x1, y1 = max(t.x, 0.0), max(t.y, 0.0)
    x2, y2 = min(t.x + t.w, float(w)), min(t.y + t.h, float(h))
    if x2 - x1 <= 0 or y2 - y1 <= 0:
        return None
    visibility = round((x2 - x1) * (y2 - y1) / (t.w * t.h), 6)
    return Box(x1, y1, x2 - x1, y2 - y1), visibility


def _contained_interval(span: float, v: float, steps: int) -> tuple[float, float]:
    """Start positions on [0, span] from which `steps` moves at velocity v
    stay within [0, span]."""
    lo = max(0.0, -v * steps)
    hi = min(span, span - v * steps)
    return lo, hi


def _max_path_iou(cand: _Target, others: list[_Target], steps: int) -> float:
    """Worst IoU between a candidate's straight path and any live target's."""
    ks = np.arange(steps + 1, dtype=np.float64)
    worst = 0.0
    for o in others:
        if not o.alive:
            continue
        ax = cand.x + cand.vx * ks
        ay = cand.y + cand.vy * ks
        bx = o.x + o.vx * ks
        by = o.y + o.vy * ks
        iw = np.minimum(ax + cand.w, bx + o.w) - np.maximum(ax, bx)
        ih = np.minimum(ay + cand.h, by + o.h) - np.maximum(ay, by)
        inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
        union = cand.w * cand.h + o.w * o.h - inter
        worst = max(worst, float(np.max(inter / union)))
    return worst


def _spawn(
    rng: np.random.Generator,
    cfg: WorldConfig,
    identity: int,
    others: list[_Target],
    steps_left: int,
) -> _Target:
    """New target with a constant random velocity, avoiding heavy initial overlap."""
    w = rng.uniform(*cfg.width_range)
    h = rng.uniform(*cfg.height_range)
    best: _Target | None = None
    best_overlap = math.inf
    for _ in range(60):
        speed = rng.uniform(*cfg.speed_range)
        angle = rng.uniform(0.0, 2.0 * math.pi)
        vx, vy = speed * math.cos(angle), speed * math.sin(angle)
        span_x = max(cfg.image_w - w, 0.0)
        span_y = max(cfg.image_h - h, 0.0)
        if cfg.keep_in_view and steps_left > 0:
            # slow down just enough that the whole remaining path fits inside
            if abs(vx) * steps_left > span_x:
                vx = math.copysign(span_x / steps_left, vx)
            if abs(vy) * steps_left > span_y:
                vy = math.copysign(span_y / steps_left, vy)
            lo_x, hi_x = _contained_interval(span_x, vx, steps_left)
            lo_y, hi_y = _contained_interval(span_y, vy, steps_left)
        else:
            lo_x, hi_x = 0.0, span_x
            lo_y, hi_y = 0.0, span_y
        candidate = _Target(
            identity, rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y), w, h, vx, vy
        )
        overlap = _max_path_iou(candidate, others, steps_left)
        if overlap < best_overlap:
            best, best_overlap = candidate, overlap
        if overlap < 0.3:
            break
    assert best is not None
    return best


def gen_sequence(cfg: WorldConfig, seed: int) -> list[GroundTruthFrame]:
    """Generate ground-truth frames for a fixed seed.

    Targets move with constant velocity (optional jitter), are clipped to
    the image border while leaving and removed once fully outside, and keep
    their identity through occlusion episodes (during which they are simply
    absent from the frame's annotation).
    """
    rng = np.random.default_rng(seed)
    targets: list[_Target] = []
    for i in range(cfg.n_targets):
        targets.append(_spawn(rng, cfg, i + 1, targets, cfg.frames - 1))
    next_identity = cfg.n_targets + 1

    frames: list[GroundTruthFrame] = []
    for f in range(cfg.frames):
        if f > 0:
            for t in targets:
                if not t.alive:
                    continue
                t.x += t.vx
                t.y += t.vy
                if cfg.motion_jitter_std > 0:
                    t.x += rng.normal(0.0, cfg.motion_jitter_std)
                    t.y += rng.normal(0.0, cfg.motion_jitter_std)
                if cfg.exit_prob > 0 and rng.random() < cfg.exit_prob:
                    t.alive = False
            if cfg.entry_prob > 0 and rng.random() < cfg.entry_prob:
                targets.append(_spawn(rng, cfg, next_identity, targets, cfg.frames - 1 - f))
                next_identity += 1

        boxes: list[Box] = []
        identities: list[int] = []
        visibilities: list[float] = []
        for t in targets:
            if not t.alive:
                continue
            clipped = _clip_to_image(t, cfg.image_w, cfg.image_h)
            if clipped is None:
                t.alive = False
                continue
            if any(ep.identity == t.identity and ep.covers(f) for ep in cfg.occlusions):
                continue
            box, visibility = clipped
            boxes.append(box)
            identities.append(t.identity)
            visibilities.append(visibility)
        frames.append(GroundTruthFrame(f, boxes, identities, visibilities))
    return frames


def _jitter(rng: np.random.Generator, box: Box, n: NoiseConfig) -> Box:
    if n.center_jitter_std == 0 and n.size_jitter_std == 0:
        return box
    cx = box.cx + rng.normal(0.0, n.center_jitter_std) if n.center_jitter_std > 0 else box.cx
    cy = box.cy + rng.normal(0.0, n.center_jitter_std) if n.center_jitter_std > 0 else box.cy
    w, h = box.w, box.h
    if n.size_jitter_std > 0:
        w = max(1.0, w + rng.normal(0.0, n.size_jitter_std))
        h = max(1.0, h + rng.normal(0.0, n.size_jitter_std))
    return Box.from_cxcywh(cx, cy, w, h)


def corrupt_to_pairs(
    sequence: list[GroundTruthFrame],
    noise: NoiseConfig,
    seed: int,
    image_w: int | None = None,
    image_h: int | None = None,
) -> list[Node]:
    """Turn a ground-truth sequence into per-node detections.

    Every node gets one pair per target visible in both of its frames,
    subject to independent drops and jitter, plus Poisson-distributed false
    positives with low identity scores. The final node duplicates the last
    frame so the last frame's boxes are still emitted.
    """
    if not sequence:
        raise ValueError("sequence must contain at least one frame")
    rng = np.random.default_rng(seed)
    if image_w is None or image_h is None:
        max_x = max((b.right for fr in sequence for b in fr.boxes), default=1920.0)
        max_y = max((b.bottom for fr in sequence for b in fr.boxes), default=1080.0)
        image_w = int(image_w or math.ceil(max_x))
        image_h = int(image_h or math.ceil(max_y))

    nodes: list[Node] = []
    for idx, frame_a in enumerate(sequence):
        frame_b = sequence[min(idx + 1, len(sequence) - 1)]
        in_a = {
            i: b
            for b, i, v in zip(frame_a.boxes, frame_a.identities, frame_a.visibilities)
            if v > noise.min_visibility
        }
        in_b = {
            i: b
            for b, i, v in zip(frame_b.boxes, frame_b.identities, frame_b.visibilities)
            if v > noise.min_visibility
        }
        pairs: list[BoxPair] = []
        for identity in sorted(in_a.keys() & in_b.keys()):
            if rng.random() < noise.drop_prob:
                continue
            pairs.append(
                BoxPair(
                    _jitter(rng, in_a[identity], noise),
                    _jitter(rng, in_b[identity], noise),
                    float(rng.uniform(*noise.true_cls_range)),
                    float(rng.uniform(*noise.true_id_range)),
                )
            )
        if noise.false_positive_rate > 0:
            for _ in range(rng.poisson(noise.false_positive_rate)):
                w = rng.uniform(20.0, max(21.0, 0.08 * image_w))
                h = rng.uniform(40.0, max(41.0, 0.25 * image_h))
                x = rng.uniform(0.0, max(image_w - w, 1.0))
                y = rng.uniform(0.0, max(image_h - h, 1.0))
                first = Box(x, y, w, h)
                second = Box(
                    x + rng.uniform(-4.0, 4.0), y + rng.uniform(-4.0, 4.0), w, h
                )
                pairs.append(
                    BoxPair(
                        first,
                        second,
                        float(rng.uniform(*noise.false_cls_range)),
                        float(rng.uniform(*noise.false_id_range)),
                    )
                )
        nodes.append(Node(frame_a.frame, pairs))
    return nodes


def sample_training_pair(
    sequence: list[GroundTruthFrame], seed: int
) -> tuple[int, int]:
    """Draw a training frame pair: gap of 1 to 3 frames, order flipped half the time."""
    if len(sequence) < 2:
        raise ValueError("need at least two frames to sample a training pair")
    rng = np.random.default_rng(seed)
    gap = int(rng.integers(1, min(3, len(sequence) - 1) + 1))
    a = int(rng.integers(0, len(sequence) - gap))
    b = a + gap
    if rng.random() < 0.5:
        a, b = b, a
    return a, b


@dataclass(frozen=True)
class AugmentTransform:
    """Reusable geometric transform; apply the same instance to both frames
    of a training pair to keep their annotations consistent."""

    crop_x: float
    crop_y: float
    crop_side: float
    expand_factor: float | None
    pad_x: float
    pad_y: float
    flip: bool
    out_side: float

    @property
    def canvas_side(self) -> float:
        if self.expand_factor is None:
            return self.crop_side
        return self.crop_side * self.expand_factor


def sample_augmentation(image_w: int, image_h: int, seed: int) -> AugmentTransform:
    """Draw crop/expand/flip parameters for an image of the given size.

    The square crop side is a uniform [0.3, 0.8] fraction of the shorter
    image side; expansion happens with probability 0.2 with a factor in
    [1, 3]; a horizontal flip happens half the time; the result is scaled
    to a square of half the original shorter side.
    """
    rng = np.random.default_rng(seed)
    shorter = float(min(image_w, image_h))
    side = rng.uniform(0.3, 0.8) * shorter
    crop_x = rng.uniform(0.0, image_w - side)
    crop_y = rng.uniform(0.0, image_h - side)
    expand_factor = None
    pad_x = pad_y = 0.0
    if rng.random() < 0.2:
        expand_factor = float(rng.uniform(1.0, 3.0))
        canvas = side * expand_factor
        pad_x = float(rng.uniform(0.0, canvas - side))
        pad_y = float(rng.uniform(0.0, canvas - side))
    flip = bool(rng.random() < 0.5)
    return AugmentTransform(
        float(crop_x), float(crop_y), float(side), expand_factor, pad_x, pad_y, flip, shorter / 2.0
    )


def apply_augmentation(frame: GroundTruthFrame, tf: AugmentTransform) -> GroundTruthFrame:
    """Apply a sampled transform to one frame's annotations.

    Boxes are kept only when their intersection-over-min-area with the crop
    exceeds 0.2; survivors are clipped to the crop, shifted by the expansion
    padding, optionally mirrored, and scaled to the output square.
    """
    crop = Box(tf.crop_x, tf.crop_y, tf.crop_side, tf.crop_side)
    canvas = tf.canvas_side
    scale = tf.out_side / canvas

    boxes: list[Box] = []
    identities: list[int] = []
    visibilities: list[float] = []
    for box, identity, visibility in zip(frame.boxes, frame.identities, frame.visibilities):
        if iom(box, crop) <= 0.2:
            continue
        x1 = max(box.x, crop.x) - crop.x
        y1 = max(box.y, crop.y) - crop.y
        x2 = min(box.right, crop.right) - crop.x
        y2 = min(box.bottom, crop.bottom) - crop.y
        x, y, w, h = x1 + tf.pad_x, y1 + tf.pad_y, x2 - x1, y2 - y1
        if tf.flip:
            x = canvas - x - w
        boxes.append(Box(x * scale, y * scale, w * scale, h * scale))
        identities.append(identity)
        visibilities.append(visibility)
    return GroundTruthFrame(frame.frame, boxes, identities, visibilities)


def augment_crop_expand_flip(
    frame: GroundTruthFrame, image_w: int, image_h: int, seed: int
) -> tuple[GroundTruthFrame, tuple[float, float], AugmentTransform]:
    """Sample a transform for the image size and apply it to one frame.

    Returns the transformed frame, the new (square) image size, and the
    transform itself so the identical parameters can be replayed on the
    other frame of the pair.
    """
    tf = sample_augmentation(image_w, image_h, seed)
    return apply_augmentation(frame, tf), (tf.out_side, tf.out_side), tf
