"""Tracker core: matching adjacent nodes and managing tracklet lifecycles.

A node holds the box pairs predicted for two adjacent frames. Chaining
matches the second boxes of the previous node against the first boxes of the
current node with the Kuhn-Munkres algorithm on 1-IoU costs; unmatched
tracklets are retained for up to sigma frames, competing in later matches
through constant-velocity predictions of their boxes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import Box, boxes_to_array, iou_matrix
from .postprocess import BoxPair, filter_confidence, soft_nms


@dataclass(frozen=True)
class Node:
    """All box pairs of one adjacent-frame pair; t is the first frame's index."""

    t: int
    pairs: list[BoxPair]


@dataclass(frozen=True)
class TrackerParams:
    iou_match_thresh: float = 0.5
    sigma: int = 10
    nms_thresh: float = 0.7
    conf_thresh: float = 0.4

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        for name in ("iou_match_thresh", "nms_thresh", "conf_thresh"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


class TrackState(enum.Enum):
    ACTIVE = "active"
    RETAINED = "retained"
    TERMINATED = "terminated"


@dataclass
class Tracklet:
    """One identity with its confirmed per-frame boxes and retention state.

    velocity holds per-frame deltas of (x, y, w, h) estimated from the last
    two confirmed entries; it is zero while only one entry exists.
    """

    identity: int
    entries: list[tuple[int, Box]]
    miss_count: int = 0
    velocity: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    state: TrackState = TrackState.ACTIVE

    def append(self, frame: int, box: Box) -> None:
        """Confirm a box for a frame, refresh the velocity and reactivate."""
        if self.entries:
            prev_frame, prev_box = self.entries[-1]
            if frame <= prev_frame:
                raise ValueError(f"entry frames must increase, got {frame} after {prev_frame}")
            dt = frame - prev_frame
            self.velocity = (
                (box.x - prev_box.x) / dt,
                (box.y - prev_box.y) / dt,
                (box.w - prev_box.w) / dt,
                (box.h - prev_box.h) / dt,
            )
        self.entries.append((frame, box))
        self.miss_count = 0
        self.state = TrackState.ACTIVE

    def record_miss(self, sigma: int) -> None:
        """Count a node without a match; terminate past the retention window."""
        self.miss_count += 1
        self.state = TrackState.RETAINED if self.miss_count <= sigma else TrackState.TERMINATED


def predict_velocity(tr: Tracklet, tau: int) -> Box:
    """Extrapolate the last confirmed box tau frames past the current miss gap.

    The total extrapolation spans miss_count + tau frames, so a tracklet that
    just missed m nodes predicts its box in the next node with tau = 1.
    Width and height are floored at one pixel.
    """
    if not tr.entries:
        raise ValueError("cannot predict from a tracklet with no entries")
    steps = tr.miss_count + tau
    _, box = tr.entries[-1]
    vx, vy, vw, vh = tr.velocity
    return Box(
        box.x + vx * steps,
        box.y + vy * steps,
        max(1.0, box.w + vw * steps),
        max(1.0, box.h + vh * steps),
    )


def km_assign(cost, forbid=None) -> np.ndarray:
    """Minimum-cost assignment; returns per-row column indices, -1 if unmatched.

    Rectangular matrices are supported. Forbidden cells never appear in the
    result: they are replaced by a sentinel larger than any permitted total,
    so the solver first maximizes the number of permitted matches and then
    minimizes their cost. Rows whose permitted cells are all forbidden come
    back unmatched.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError(f"cost must be a 2-D matrix, got shape {cost.shape}")
    n, m = cost.shape
    result = np.full(n, -1, dtype=np.int64)
    if n == 0 or m == 0:
        return result
    if forbid is None:
        mask = np.zeros((n, m), dtype=bool)
    else:
        mask = np.asarray(forbid, dtype=bool)
        if mask.shape != (n, m):
            raise ValueError("forbid mask shape differs from cost shape")
    permitted = cost[~mask]
    if permitted.size and not np.all(np.isfinite(permitted)):
        raise ValueError("permitted costs must be finite")
    big = 2.0 * float(np.abs(permitted).sum()) + 1.0 if permitted.size else 1.0
    work = np.where(mask, big, cost)
    rows, cols = linear_sum_assignment(work)
    for r, c in zip(rows, cols):
        if not mask[r, c]:
            result[r] = c
    return result


def chain_node(
    tracklets: list[Tracklet],
    prev_pairs: list[BoxPair],
    cur_pairs: list[BoxPair],
    p: TrackerParams = TrackerParams(),
    *,
    frame: int,
) -> list[Tracklet]:
    """Match one node against the live tracklets and update their lifecycles.

    Active tracklets must correspond index-wise to prev_pairs; their second
    boxes, together with constant-velocity predictions for retained
    tracklets, are matched against the first boxes of cur_pairs. Matched
    tracklets confirm the current first box, unmatched current pairs spawn
    fresh identities from a monotone counter, and unmatched tracklets move
    toward retention or termination.

    The returned list starts with the tracklet consuming cur_pairs[j] at
    position j (these are exactly the active ones), followed by the
    remaining tracklets.
    """
    active = [t for t in tracklets if t.state is TrackState.ACTIVE]
    retained = [t for t in tracklets if t.state is TrackState.RETAINED]
    terminated = [t for t in tracklets if t.state is TrackState.TERMINATED]
    if len(active) != len(prev_pairs):
        raise ValueError(
            f"{len(prev_pairs)} previous pairs do not match {len(active)} active tracklets"
        )

    row_tracklets = active + retained
    row_boxes = [pp.second for pp in prev_pairs] + [predict_velocity(t, 1) for t in retained]
    col_boxes = [cp.first for cp in cur_pairs]

    overlaps = iou_matrix(boxes_to_array(row_boxes), boxes_to_array(col_boxes))
    match = km_assign(1.0 - overlaps, overlaps < p.iou_match_thresh)

    consumer: dict[int, Tracklet] = {}
    matched_rows = set()
    for r, c in enumerate(match):
        if c >= 0:
            consumer[int(c)] = row_tracklets[r]
            matched_rows.add(r)

    next_identity = max((t.identity for t in tracklets), default=0) + 1
    front: list[Tracklet] = []
    for j, pair in enumerate(cur_pairs):
        tracklet = consumer.get(j)
        if tracklet is None:
            tracklet = Tracklet(next_identity, [(frame, pair.first)])
            next_identity += 1
        else:
            tracklet.append(frame, pair.first)
        front.append(tracklet)

    back: list[Tracklet] = []
    for r, tracklet in enumerate(row_tracklets):
        if r not in matched_rows:
            tracklet.record_miss(p.sigma)
            back.append(tracklet)
    return front + back + terminated


def run_tracker(
    nodes: list[Node], p: TrackerParams = TrackerParams()
) -> dict[int, dict[int, Box]]:
    """Chain a node sequence into trajectories, a frame -> identity -> box table.

    Each node's pairs first go through soft-NMS and confidence filtering.
    Identities start from the first node's pairs; every later node is chained
    via :func:`chain_node`. Only confirmed boxes are emitted; the predicted
    boxes used for retention matching never appear in the output.
    """
    if not nodes:
        raise ValueError("node sequence must not be empty")
    if any(b.t <= a.t for a, b in zip(nodes, nodes[1:])):
        raise ValueError("nodes must be in strictly increasing frame order")

    processed = [
        filter_confidence(soft_nms(node.pairs, p.nms_thresh), p.conf_thresh) for node in nodes
    ]

    tracklets = [
        Tracklet(i + 1, [(nodes[0].t, pair.first)]) for i, pair in enumerate(processed[0])
    ]
    handles = processed[0]
    for node, pairs in zip(nodes[1:], processed[1:]):
        tracklets = chain_node(tracklets, handles, pairs, p, frame=node.t)
        handles = pairs

    trajectories: dict[int, dict[int, Box]] = {}
    for tracklet in tracklets:
        for frame, box in tracklet.entries:
            trajectories.setdefault(frame, {})[tracklet.identity] = box
    return trajectories


def fill_trajectory_gaps(trajectories: dict[int, dict[int, Box]]) -> dict[int, dict[int, Box]]:
    """Linearly interpolate each identity's boxes across retention gaps."""
    per_id: dict[int, list[tuple[int, Box]]] = {}
    for frame in sorted(trajectories):
        for identity, box in trajectories[frame].items():
            per_id.setdefault(identity, []).append((frame, box))

    filled = {frame: dict(boxes) for frame, boxes in trajectories.items()}
    for identity, entries in per_id.items():
        for (f1, b1), (f2, b2) in zip(entries, entries[1:]):
            span = f2 - f1
            for f in range(f1 + 1, f2):
                a = (f - f1) / span
                box = Box(
                    b1.x + a * (b2.x - b1.x),
                    b1.y + a * (b2.y - b1.y),
                    b1.w + a * (b2.w - b1.w),
                    b1.h + a * (b2.h - b1.h),
                )
                filled.setdefault(f, {})[identity] = box
    return filled
