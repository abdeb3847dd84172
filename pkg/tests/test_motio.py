import pytest

from chainflow.chaining import Node
from chainflow.geometry import Box
from chainflow.motio import (
    ParseError,
    SequenceInfo,
    parse_gt,
    parse_pairs,
    parse_results,
    parse_seqinfo,
    write_gt,
    write_pairs,
    write_results,
    write_seqinfo,
)
from chainflow.postprocess import BoxPair
from chainflow.simulator import NoiseConfig, WorldConfig, corrupt_to_pairs, gen_sequence
from chainflow.supervision import GroundTruthFrame


class TestParseGt:
    def test_basic_row(self, tmp_path):
        p = tmp_path / "gt.txt"
        p.write_text("1,3,10,20,30,40,1,1,0.9\n")
        frames = parse_gt(p)
        assert len(frames) == 1
        fr = frames[0]
        assert fr.frame == 0  # files are 1-based, memory is 0-based
        assert fr.identities == [3]
        assert fr.boxes == [Box(10, 20, 30, 40)]
        assert fr.visibilities == [0.9]

    def test_visibility_filter(self, tmp_path):
        p = tmp_path / "gt.txt"
        p.write_text("1,1,10,20,30,40,1,1,0.05\n1,2,10,20,30,40,1,1,0.50\n")
        frames = parse_gt(p, min_visibility=0.1)
        assert frames[0].identities == [2]

    def test_visibility_boundary_excluded(self, tmp_path):
        p = tmp_path / "gt.txt"
        p.write_text("1,1,10,20,30,40,1,1,0.1\n")
        assert parse_gt(p, min_visibility=0.1) == []

    def test_malformed_row_reports_line(self, tmp_path):
        p = tmp_path / "gt.txt"
        p.write_text("1,1,10,20,30,40,1,1,1.0\njunk\n")
        with pytest.raises(ParseError, match=r"gt\.txt:2"):
            parse_gt(p)

    def test_non_numeric_field_reports_line(self, tmp_path)            :
        p = tmp_path / "gt.txt"
        p.write_text("1,1,ten,20,30,40,1,1,1.0\n")
        with pytest.raises(ParseError, match=":1"):
            parse_gt(p)

    def test_non_positive_size_rejected(self, tmp_path):
        p = tmp_path / "gt.txt"
        p.write_text("1,1,10,20,0,40,1,1,1.0\n")
        with pytest.raises(ParseError, match="size"):
            parse_gt(p)

    def test_duplicate_identity_rejected(self, tmp_path):
        p = tmp_path / "gt.txt"
        p.write_text("1,1,10,20,30,40,1,1,1.0\n1,1,50,20,30,40,1,1,1.0\n")
        with pytest.raises(ParseError, match="duplicate"):
            parse_gt(p)

    def test_ordering_by_frame_and_id(self, tmp_path):
        p = tmp_path / "gt.txt"
        p.write_text(
            "2,5,1,1,10,10,1,1,1.0\n"
            "1,9,1,1,10,10,1,1,1.0\n"
            "1,2,1,1,10,10,1,1,1.0\n"
        )
        frames = parse_gt(p)
        assert [fr.frame for fr in frames] == [0, 1]
        assert frames[0].identities == [2, 9]

    def test_gt_roundtrip(self, tmp_path):
        cfg = WorldConfig(frames=12, image_w=400, image_h=300, n_targets=3)
        sequence = gen_sequence(cfg, seed=5)
        path = tmp_path / "gt.txt"
        write_gt(path, sequence)
        parsed = parse_gt(path, min_visibility=0.0)
        by_frame = {fr.frame: fr for fr in parsed}
        for fr in sequence:
            if not fr.boxes:
                assert fr.frame not in by_frame
                continue
            got = by_frame[fr.frame]
            order = sorted(range(len(fr.identities)), key=lambda i: fr.identities[i])
            assert got.identities == [fr.identities[i] for i in order]
            for slot, i in enumerate(order):
                want = fr.boxes[i]
                have = got.boxes[slot]
                for a, b in zip(have.as_tuple(), want.as_tuple()):
                    assert abs(a - b) <= 0.005  # two-decimal serialization
                assert got.visibilities[slot] == pytest.approx(
                    fr.visibilities[i], abs=1e-6
                )


class TestResults:
    def test_empty_trajectories(self, tmp_path):
        p = tmp_path / "res.txt"
        write_results(p, {})
        assert p.read_bytes() == b""
        assert parse_results(p) == {}

    def test_single_row(self, tmp_path):
        p = tmp_path / "res.txt"
        write_results(p, {0: {1: Box(10, 20, 30, 40)}})
        assert p.read_text() == "1,1,10.00,20.00,30.00,40.00,1,-1,-1,-1\n"

    def test_roundtrip_byte_identical(self, tmp_path):
        trajectories = {
            0: {2: Box(10.125, 20.5, 30.75, 40.0), 1: Box(1, 2, 3, 4)},
            3: {2: Box(11.5, 21.5, 30.75, 40.0)},
        }
        p1 = tmp_path / "a.txt"
        p2 = tmp_path / "b.txt"
        write_results(p1, trajectories)
        write_results(p2, parse_results(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_sorted_output(self, tmp_path):
        p = tmp_path / "res.txt"
        write_results(p, {1: {5: Box(1, 1, 2, 2), 2: Box(3, 3, 2, 2)}, 0: {9: Box(0, 0, 1, 1)}})
        lines = p.read_text().splitlines()
        assert [line.split(",")[:2] for line in lines] == [["1", "9"], ["2", "2"], ["2", "5"]]

    def test_malformed_rejected(self, tmp_path):
        p = tmp_path / "res.txt"
        p.write_text("1,1,10,20,30\n")
        with pytest.raises(ParseError, match=":1"):
            parse_results(p)


class TestPairs:
    def test_empty_file(self, tmp_path):
        p = tmp_path / "pairs.csv"
        p.write_text("")
        assert parse_pairs(p) == []

    def test_rows_group_by_node(self, tmp_path):
        p = tmp_path / "pairs.csv"
        p.write_text(
            "5,0,0,10,10,1,0,10,10,0.9,0.8\n"
            "5,50,0,10,10,51,0,10,10,0.7,0.6\n"
            "2,0,0,10,10,0,0,10,10,1.0,1.0\n"
        )
        nodes = parse_pairs(p)
        assert [n.t for n in nodes] == [1, 4]
        assert len(nodes[1].pairs) == 2

    def test_score_out_of_range_rejected(self, tmp_path):
        p = tmp_path / "pairs.csv"
        p.write_text("1,0,0,10,10,0,0,10,10,1.5,0.5\n")
        with pytest.raises(ParseError, match="cls_score"):
            parse_pairs(p)

    def test_malformed_reports_line(self, tmp_path):
        p = tmp_path / "pairs.csv"
        p.write_text("1,0,0,10,10,0,0,10,10,0.5,0.5\n1,2,3\n")
        with pytest.raises(ParseError, match=":2"):
            parse_pairs(p)

    def test_simulator_roundtrip(self, tmp_path):
        cfg = WorldConfig(frames=8, image_w=400, image_h=300, n_targets=3)
        sequence = gen_sequence(cfg, seed=9)
        nodes = corrupt_to_pairs(sequence, NoiseConfig(), seed=10)
        p1 = tmp_path / "pairs.csv"
        p2 = tmp_path / "again.csv"
        write_pairs(p1, nodes)
        write_pairs(p2, parse_pairs(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_write_skips_empty_nodes(self, tmp_path):
        nodes = [
            Node(0, [BoxPair(Box(0, 0, 1, 1), Box(0, 0, 1, 1), 0.5, 0.5)]),
            Node(1, []),
        ]
        p = tmp_path / "pairs.csv"
        write_pairs(p, nodes)
        assert len(p.read_text().splitlines()) == 1


class TestSeqinfo:
    def test_roundtrip(self, tmp_path):
        info = SequenceInfo("sim-7", 120, 1920, 1080, 30.0)
        p = tmp_path / "seqinfo.ini"
        write_seqinfo(p, info)
        assert parse_seqinfo(p) == info

    def test_missing_key_named(self, tmp_path):
        p = tmp_path / "seqinfo.ini"
        p.write_text("[Sequence]\nname=x\nseqLength=10\nimHeight=5\nframeRate=30\n")
        with pytest.raises(ParseError, match="imWidth"):
            parse_seqinfo(p)

    def test_missing_section(self, tmp_path):
        p = tmp_path / "seqinfo.ini"
        p.write_text("[Other]\nname=x\n")
        with pytest.raises(ParseError, match="Sequence"):
            parse_seqinfo(p)

    def test_matches_world_config(self, tmp_path):
        info = SequenceInfo("sim-0", 50, 640, 480, 30.0)
        p = tmp_path / "seqinfo.ini"
        write_seqinfo(p, info)
        back = parse_seqinfo(p)
        assert (back.frame_count, back.image_w, back.image_h) == (50, 640, 480)
