import numpy as np
import pytest

from chainflow.geometry import Box, iou
from chainflow.postprocess import (
    BoxPair,
    ScoreGrid,
    filter_confidence,
    joint_attention,
    soft_nms,
)


def pair(x, y, w=10.0, h=10.0, cls_score=0.9, id_score=0.8, shift=2.0):
    first = Box(x, y, w, h)
    return BoxPair(first, Box(x + shift, y, w, h), cls_score, id_score)


def random_pairs(rng, n, span=60.0):
    out = []
    for _ in range(n):
        w = rng.uniform(5, 25)
        h = rng.uniform(5, 25)
        x = rng.uniform(0, span)
        y = rng.uniform(0, span)
        out.append(
            BoxPair(
                Box(x, y, w, h),
                Box(x + rng.uniform(-3, 3), y + rng.uniform(-3, 3), w, h),
                float(rng.uniform(0, 1)),
                float(rng.uniform(0, 1)),
            )
        )
    return out


def soft_nms_reference(pairs, thresh):
    """Independent quadratic restatement of linear soft suppression."""
    scores = {i: p.cls_score for i, p in enumerate(pairs)}
    pending = list(range(len(pairs)))
    picked = []
    while pending:
        best = pending[0]
        for i in pending[1:]:
            if scores[i] > scores[best]:
                best = i
        pending.remove(best)
        picked.append(best)
        for i in pending:
            overlap = iou(pairs[best].first, pairs[i].first)
            if overlap > thresh:
                scores[i] = scores[i] * (1.0 - overlap)
    return [(i, scores[i]) for i in picked]


class TestJointAttention:
    def test_identity_attention(self):
        rng = np.random.default_rng(0)
        features = ScoreGrid(rng.normal(size=(4, 5, 3)))
        ones = ScoreGrid(np.ones((4, 5, 1)))
        out = joint_attention(features, ones, ones)
        assert np.array_equal(out.values, features.values)

    def test_zero_attention_annihilates(self):
        rng = np.random.default_rng(1)
        features = ScoreGrid(rng.normal(size=(4, 4, 2)))
        zeros = ScoreGrid(np.zeros((4, 4, 1)))
        ones = ScoreGrid(np.ones((4, 4, 1)))
        out = joint_attention(features, zeros, ones)
        assert np.all(out.values == 0.0)

    def test_matches_loop_oracle_exactly(self):
        rng = np.random.default_rng(2)
        features = ScoreGrid(rng.normal(size=(4, 4, 3)))
        cls_map = ScoreGrid(rng.uniform(size=(4, 4, 1)))
        id_map = ScoreGrid(rng.uniform(size=(4, 4, 1)))
        out = joint_attention(features, cls_map, id_map)
        for y in range(4):
            for x in range(4):
                attention = cls_map.values[y, x, 0] * id_map.values[y, x, 0]
                for c in range(3):
                    assert out.values[y, x, c] == features.values[y, x, c] * attention

    def test_dimension_mismatch_rejected(self):
        features = ScoreGrid(np.ones((4, 4, 3)))
        with pytest.raises(ValueError):
            joint_attention(features, ScoreGrid(np.ones((4, 4, 2))), ScoreGrid(np.ones((4, 4, 1))))
        with pytest.raises(ValueError):
            joint_attention(features, ScoreGrid(np.ones((3, 4, 1))), ScoreGrid(np.ones((4, 4, 1))))


class TestSoftNms:
    def test_single_pair_unchanged(self):
        p = pair(0, 0)
        assert soft_nms([p], 0.7) == [p]

    def test_disjoint_pairs_unchanged(self):
        a, b = pair(0, 0, cls_score=0.9), pair(100, 100, cls_score=0.5)
        out = soft_nms([a, b], 0.7)
        assert out == [a, b]

    def test_identical_first_boxes_full_decay(self):
        a = pair(0, 0, cls_score=0.9)
        b = pair(0, 0, cls_score=0.8)
        out = soft_nms([a, b], 0.7)
        assert out[0].cls_score == 0.9
        assert out[1].cls_score == 0.0

    def test_second_boxes_never_affect_suppression(self):
        # identical second boxes, disjoint first boxes: no decay
        a = BoxPair(Box(0, 0, 10, 10), Box(50, 50, 10, 10), 0.9, 0.5)
        b = BoxPair(Box(100, 0, 10, 10), Box(50, 50, 10, 10), 0.8, 0.5)
        out = soft_nms([a, b], 0.7)
        assert [p.cls_score for p in out] == [0.9, 0.8]

    def test_threshold_one_is_pure_sort(self):
        rng = np.random.default_rng(3)
        pairs = random_pairs(rng, 20)
        out = soft_nms(pairs, 1.0)
        assert sorted(p.cls_score for p in out) == sorted(p.cls_score for p in pairs)
        assert [p.cls_score for p in out] == sorted(
            (p.cls_score for p in pairs), reverse=True
        )

    def test_never_raises_scores_never_moves_boxes(self):
        rng = np.random.default_rng(4)
        pairs = random_pairs(rng, 40, span=30.0)
        out = soft_nms(pairs, 0.3)
        by_boxes = {(p.first.as_tuple(), p.second.as_tuple()): p for p in pairs}
        assert len(by_boxes) == len(pairs)
        for q in out:
            original = by_boxes[(q.first.as_tuple(), q.second.as_tuple())]
            assert q.cls_score <= original.cls_score
            assert q.id_score == original.id_score

    def test_matches_reference_exactly(self):
        rng = np.random.default_rng(5)
        for trial in range(50):
            pairs = random_pairs(rng, int(rng.integers(1, 15)), span=40.0)
            got = soft_nms(pairs, 0.5)
            want = soft_nms_reference(pairs, 0.5)
            index_of = {id(p): i for i, p in enumerate(pairs)}
            got_scores = [q.cls_score for q in got]
            want_scores = [s for _, s in want]
            assert got_scores == want_scores, f"trial {trial}"


class TestFilterConfidence:
    def test_all_pass(self):
        pairs = [pair(0, 0, cls_score=1.0), pair(20, 0, cls_score=1.0)]
        assert filter_confidence(pairs, 0.4) == pairs

    def test_all_fail(self):
        pairs = [pair(0, 0, cls_score=0.0), pair(20, 0, cls_score=0.0)]
        assert filter_confidence(pairs, 0.4) == []

    def test_boundary_inclusive(self):
        pairs = [
            pair(0, 0, cls_score=0.39),
            pair(20, 0, cls_score=0.40),
            pair(40, 0, cls_score=0.41),
        ]
        out = filter_confidence(pairs, 0.4)
        assert [p.cls_score for p in out] == [0.40, 0.41]

    def test_subsequence_order_preserved(self):
        rng = np.random.default_rng(6)
        pairs = random_pairs(rng, 30)
        out = filter_confidence(pairs, 0.5)
        kept = [p for p in pairs if p.cls_score >= 0.5]
        assert out == kept


class TestBoxPairValidation:
    def test_score_range_enforced(self):
        with pytest.raises(ValueError):
            BoxPair(Box(0, 0, 1, 1), Box(0, 0, 1, 1), 1.2, 0.5)
        with pytest.raises(ValueError):
            BoxPair(Box(0, 0, 1, 1), Box(0, 0, 1, 1), 0.5, -0.1)
