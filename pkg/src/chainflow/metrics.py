"""CLEAR-MOT and IDF1 evaluation with MOTChallenge-style aggregation.

Sequences are compared as frame tables (frame -> identity -> box). Per-frame
correspondences persist from the previous frame while they still overlap
above the threshold; leftovers are rematched with the Kuhn-Munkres
algorithm. Identity switches are counted whenever a ground-truth target
resumes with a different hypothesis identity than its most recent match,
including across gaps. IDF1 comes from a global identity-level matching.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chaining import km_assign
from .geometry import Box, boxes_to_array, iou, iou_matrix
from .supervision import GroundTruthFrame

FrameTable = dict[int, dict[int, Box]]

MT_COVERAGE = 0.8
ML_COVERAGE = 0.2


@dataclass
class ClearReport:
    """Raw evaluation tallies of one sequence (or of an aggregation).

    Percentage metrics are derived properties so that aggregated reports
    recompute them from summed tallies rather than averaging percentages.
    """

    name: str
    fp: int
    fn: int
    ids: int
    gt_count: int
    matches: int
    iou_sum: float
    idtp: int
    n_trajectories: int
    mt_count: int
    ml_count: int

    @property
    def hyp_count(self) -> int:
        return self.matches + self.fp

    @property
    def mota(self) -> float:
        if self.gt_count == 0:
            return 0.0
        return 100.0 * (1.0 - (self.fp + self.fn + self.ids) / self.gt_count)

    @property
    def motp(self) -> float:
        if self.matches == 0:
            return 0.0
        return 100.0 * self.iou_sum / self.matches

    @property
    def idf1(self) -> float:
        denom = self.gt_count + self.hyp_count
        if denom == 0:
            return 0.0
        return 200.0 * self.idtp / denom

    @property
    def mt(self) -> float:
        if self.n_trajectories == 0:
            return 0.0
        return 100.0 * self.mt_count / self.n_trajectories

    @property
    def ml(self) -> float:
        if self.n_trajectories == 0:
            return 0.0
        return 100.0 * self.ml_count / self.n_trajectories

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "fp": self.fp,
            "fn": self.fn,
            "ids": self.ids,
            "gt_count": self.gt_count,
            "matches": self.matches,
            "iou_sum": self.iou_sum,
            "idtp": self.idtp,
            "n_trajectories": self.n_trajectories,
            "mt_count": self.mt_count,
            "ml_count": self.ml_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ClearReport":
        return cls(
            name=str(data["name"]),
            fp=int(data["fp"]),
            fn=int(data["fn"]),
            ids=int(data["ids"]),
            gt_count=int(data["gt_count"]),
            matches=int(data["matches"]),
            iou_sum=float(data["iou_sum"]),
            idtp=int(data["idtp"]),
            n_trajectories=int(data["n_trajectories"]),
            mt_count=int(data["mt_count"]),
            ml_count=int(data["ml_count"]),
        )


def frame_table(sequence: list[GroundTruthFrame]) -> FrameTable:
    """Index a ground-truth sequence as frame -> identity -> box."""
    table: FrameTable = {}
    for fr in sequence:
        table[fr.frame] = dict(zip(fr.identities, fr.boxes))
    return table


@dataclass
class _FrameMatches:
    fp: int
    fn: int
    ids: int
    matches: list[tuple[int, int, int, float]]  # (frame, gt id, hyp id, IoU)


def _match_frames(gt: FrameTable, hyp: FrameTable, iou_thresh: float) -> _FrameMatches:
    if not gt:
        raise ValueError("ground truth is empty")
    lo, hi = min(gt), max(gt)
    outside = [f for f in hyp if f < lo or f > hi]
    if outside:
        raise ValueError(
            f"hypothesis frames {sorted(outside)[:5]} fall outside the ground-truth range"
        )

    correspondence: dict[int, int] = {}  # gt identity -> last matched hyp identity
    fp = fn = ids = 0
    all_matches: list[tuple[int, int, int, float]] = []

    for f in sorted(set(gt) | set(hyp)):
        gt_map = gt.get(f, {})
        hyp_map = hyp.get(f, {})
        matched_g: set[int] = set()
        matched_h: set[int] = set()
        frame_matches: list[tuple[int, int, float]] = []

        # keep previous correspondences that still overlap
        for gid in sorted(gt_map):
            hid = correspondence.get(gid)
            if hid is None or hid not in hyp_map or hid in matched_h:
                continue
            overlap = iou(gt_map[gid], hyp_map[hid])
            if overlap >= iou_thresh:
                frame_matches.append((gid, hid, overlap))
                matched_g.add(gid)
                matched_h.add(hid)

        # rematch the rest with minimum-cost assignment
        rest_g = [gid for gid in sorted(gt_map) if gid not in matched_g]
        rest_h = [hid for hid in sorted(hyp_map) if hid not in matched_h]
        if rest_g and rest_h:
            overlaps = iou_matrix(
                boxes_to_array([gt_map[g] for g in rest_g]),
                boxes_to_array([hyp_map[h] for h in rest_h]),
            )
            assign = km_assign(1.0 - overlaps, overlaps < iou_thresh)
            for i, j in enumerate(assign):
                if j >= 0:
                    frame_matches.append((rest_g[i], rest_h[int(j)], float(overlaps[i, j])))
                    matched_g.add(rest_g[i])
                    matched_h.add(rest_h[int(j)])

        for gid, hid, overlap in frame_matches:
            previous = correspondence.get(gid)
            if previous is not None and previous != hid:
                ids += 1
            correspondence[gid] = hid
            all_matches.append((f, gid, hid, overlap))
        fp += len(hyp_map) - len(matched_h)
        fn += len(gt_map) - len(matched_g)

    return _FrameMatches(fp, fn, ids, all_matches)


def _coverage_counts(
    gt: FrameTable, matches: list[tuple[int, int, int, float]]
) -> tuple[int, int, int]:
    """(trajectory count, mostly-tracked count, mostly-lost count)."""
    total_frames: dict[int, int] = {}
    for f, id_map in gt.items():
        for gid in id_map:
            total_frames[gid] = total_frames.get(gid, 0) + 1
    matched_frames: dict[int, int] = {}
    for _, gid, _, _ in matches:
        matched_frames[gid] = matched_frames.get(gid, 0) + 1

    mt = ml = 0
    for gid, total in total_frames.items():
        coverage = matched_frames.get(gid, 0) / total
        if coverage >= MT_COVERAGE:
            mt += 1
        elif coverage <= ML_COVERAGE:
            ml += 1
    return len(total_frames), mt, ml


def _idf1_tallies(gt: FrameTable, hyp: FrameTable, iou_thresh: float) -> tuple[int, int, int]:
    """(IDTP, total gt boxes, total hyp boxes) from global identity matching."""
    gt_sizes: dict[int, int] = {}
    hyp_sizes: dict[int, int] = {}
    overlap_counts: dict[tuple[int, int], int] = {}
    for f in sorted(set(gt) | set(hyp)):
        gt_map = gt.get(f, {})
        hyp_map = hyp.get(f, {})
        for gid in gt_map:
            gt_sizes[gid] = gt_sizes.get(gid, 0) + 1
        for hid in hyp_map:
            hyp_sizes[hid] = hyp_sizes.get(hid, 0) + 1
        for gid, gbox in gt_map.items():
            for hid, hbox in hyp_map.items():
                if iou(gbox, hbox) >= iou_thresh:
                    key = (gid, hid)
                    overlap_counts[key] = overlap_counts.get(key, 0) + 1

    gt_ids = sorted(gt_sizes)
    hyp_ids = sorted(hyp_sizes)
    n_gt_boxes = sum(gt_sizes.values())
    n_hyp_boxes = sum(hyp_sizes.values())
    if not gt_ids or not hyp_ids:
        return 0, n_gt_boxes, n_hyp_boxes

    # padded square problem: unmatched identities pay their full box count
    g, h = len(gt_ids), len(hyp_ids)
    size = g + h
    cost = np.zeros((size, size), dtype=np.float64)
    forbid = np.zeros((size, size), dtype=bool)
    for i, gid in enumerate(gt_ids):
        for j, hid in enumerate(hyp_ids):
            o = overlap_counts.get((gid, hid), 0)
            cost[i, j] = gt_sizes[gid] + hyp_sizes[hid] - 2 * o
    forbid[:g, h:] = True
    forbid[g:, :h] = True
    for i, gid in enumerate(gt_ids):
        cost[i, h + i] = gt_sizes[gid]
        forbid[i, h + i] = False
    for j, hid in enumerate(hyp_ids):
        cost[g + j, j] = hyp_sizes[hid]
        forbid[g + j, j] = False

    assign = km_assign(cost, forbid)
    total_cost = sum(cost[r, c] for r, c in enumerate(assign) if c >= 0)
    idtp = round((n_gt_boxes + n_hyp_boxes - total_cost) / 2.0)
    return int(idtp), n_gt_boxes, n_hyp_boxes


def clear_mot(
    gt: FrameTable, hyp: FrameTable, iou_thresh: float = 0.5, name: str = "sequence"
) -> ClearReport:
    """Evaluate one sequence and return its full tally report."""
    result = _match_frames(gt, hyp, iou_thresh)
    n_traj, mt_count, ml_count = _coverage_counts(gt, result.matches)
    idtp, n_gt_boxes, _ = _idf1_tallies(gt, hyp, iou_thresh)
    return ClearReport(
        name=name,
        fp=result.fp,
        fn=result.fn,
        ids=result.ids,
        gt_count=n_gt_boxes,
        matches=len(result.matches),
        iou_sum=float(sum(m[3] for m in result.matches)),
        idtp=idtp,
        n_trajectories=n_traj,
        mt_count=mt_count,
        ml_count=ml_count,
    )


def idf1(gt: FrameTable, hyp: FrameTable, iou_thresh: float = 0.5) -> float:
    """IDF1 percentage from the optimal global identity matching."""
    idtp, n_gt_boxes, n_hyp_boxes = _idf1_tallies(gt, hyp, iou_thresh)
    denom = n_gt_boxes + n_hyp_boxes
    if denom == 0:
        return 0.0
    return 200.0 * idtp / denom


def mt_ml(
    gt: FrameTable, hyp: FrameTable, iou_thresh: float = 0.5
) -> tuple[float, float]:
    """(mostly-tracked %, mostly-lost %) over ground-truth identities."""
    result = _match_frames(gt, hyp, iou_thresh)
    n_traj, mt_count, ml_count = _coverage_counts(gt, result.matches)
    if n_traj == 0:
        return 0.0, 0.0
    return 100.0 * mt_count / n_traj, 100.0 * ml_count / n_traj


def aggregate(reports: list[ClearReport], name: str = "OVERALL") -> ClearReport:
    """Combine per-sequence reports into a totals row.

    Count columns are summed; percentage metrics fall out of the summed
    tallies, which matches weighting MOTP by matches, IDF1 by identity box
    counts and MT/ML by trajectory counts.
    """
    if not reports:
        raise ValueError("cannot aggregate an empty report list")
    return ClearReport(
        name=name,
        fp=sum(r.fp for r in reports),
        fn=sum(r.fn for r in reports),
        ids=sum(r.ids for r in reports),
        gt_count=sum(r.gt_count for r in reports),
        matches=sum(r.matches for r in reports),
        iou_sum=sum(r.iou_sum for r in reports),
        idtp=sum(r.idtp for r in reports),
        n_trajectories=sum(r.n_trajectories for r in reports),
        mt_count=sum(r.mt_count for r in reports),
        ml_count=sum(r.ml_count for r in reports),
    )
