import json
from pathlib import Path

import pytest

from chainflow.cli import build_parser, run_cli
from chainflow.motio import parse_results

DATA = Path(__file__).parent / "data"


def run(capsys, *argv):
    code = run_cli(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestArgumentHandling:
    def test_no_subcommand_prints_usage_exit_1(self, capsys):
        code, out, err = run(capsys)
        assert code == 1
        assert "usage" in err.lower()

    def test_unknown_flag_exit_1(self, capsys):
        code, _, err = run(capsys, "track", "--pairs", "x", "--out", "y", "--bogus")
        assert code == 1

    def test_unknown_subcommand_exit_1(self, capsys):
        code, _, _ = run(capsys, "frobnicate")
        assert code == 1

    def test_out_of_range_flag_exit_1(self, capsys):
        code, _, _ = run(capsys, "track", "--pairs", "x", "--out", "y", "--iou", "1.5")
        assert code == 1

    def test_missing_file_exit_2(self, capsys, tmp_path):
        code, _, _ = run(capsys, "track", "--pairs", str(tmp_path / "nope.csv"),
                         "--out", str(tmp_path / "res.txt"))
        assert code == 2

    def test_malformed_file_exit_2(self, capsys, tmp_path):
        bad = tmp_path / "pairs.csv"
        bad.write_text("not,a,valid,row\n")
        code, _, err = run(capsys, "track", "--pairs", str(bad),
                           "--out", str(tmp_path / "res.txt"))
        assert code == 2
        assert "pairs.csv:1" in err

    def test_help_exits_zero(self, capsys):
        code, out, _ = run(capsys, "--help")
        assert code == 0
        for sub in ("simulate", "track", "eval", "anchors", "gradcheck", "pipeline"):
            assert sub in out


class TestDefaults:
    def test_tracker_flag_defaults_match_library(self):
        parser = build_parser()
        args = parser.parse_args(["track", "--pairs", "x", "--out", "y"])
        assert args.sigma == 10
        assert args.iou == 0.5
        assert args.nms == 0.7
        assert args.conf == 0.4
        assert args.fill_gaps is False

    def test_eval_defaults(self):
        parser = build_parser()
        args = parser.parse_args(["eval", "--gt", "a", "--res", "b"])
        assert args.iou == 0.5
        assert args.min_visibility == 0.1
        assert args.format == "table"

    def test_pipeline_noise_defaults_are_zero(self):
        parser = build_parser()
        args = parser.parse_args(["pipeline"])
        assert args.center_jitter == 0.0
        assert args.size_jitter == 0.0
        assert args.drop_prob == 0.0
        assert args.fp_rate == 0.0


class TestSimulateTrackEval:
    def test_simulate_writes_three_files(self, capsys, tmp_path):
        out = tmp_path / "seq"
        code, _, _ = run(capsys, "simulate", "--seed", "3", "--frames", "12",
                         "--targets", "3", "--width", "640", "--height", "480",
                         "--out", str(out))
        assert code == 0
        assert (out / "gt.txt").is_file()
        assert (out / "pairs.csv").is_file()
        assert (out / "seqinfo.ini").is_file()

    def test_simulate_deterministic(self, capsys, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            code, _, _ = run(capsys, "simulate", "--seed", "5", "--frames", "10",
                             "--targets", "2", "--width", "640", "--height", "480",
                             "--out", str(out))
            assert code == 0
        for name in ("gt.txt", "pairs.csv", "seqinfo.ini"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_track_then_eval(self, capsys, tmp_path):
        out = tmp_path / "seq"
        run(capsys, "simulate", "--seed", "4", "--frames", "15", "--targets", "3",
            "--width", "800", "--height", "600", "--out", str(out))
        res = tmp_path / "res.txt"
        code, _, _ = run(capsys, "track", "--pairs", str(out / "pairs.csv"),
                         "--out", str(res))
        assert code == 0
        assert parse_results(res)
        code, table, _ = run(capsys, "eval", "--gt", str(out / "gt.txt"),
                             "--res", str(res))
        assert code == 0
        assert "MOTA" in table and "100.0" in table

    def test_eval_directory_mode(self, capsys, tmp_path):
        gt_root = tmp_path / "gt_root"
        res_root = tmp_path / "res_root"
        res_root.mkdir()
        for seed in (1, 2):
            seq_dir = gt_root / f"seq-{seed}"
            run(capsys, "simulate", "--seed", str(seed), "--frames", "10",
                "--targets", "2", "--width", "640", "--height", "480",
                "--out", str(seq_dir))
            run(capsys, "track", "--pairs", str(seq_dir / "pairs.csv"),
                "--out", str(res_root / f"seq-{seed}.txt"))
        code, out, _ = run(capsys, "eval", "--gt", str(gt_root), "--res", str(res_root))
        assert code == 0
        assert "seq-1" in out and "seq-2" in out and "TOTAL" in out

    def test_eval_json_format(self, capsys, tmp_path):
        out = tmp_path / "seq"
        run(capsys, "simulate", "--seed", "6", "--frames", "10", "--targets", "2",
            "--width", "640", "--height", "480", "--out", str(out))
        res = tmp_path / "res.txt"
        run(capsys, "track", "--pairs", str(out / "pairs.csv"), "--out", str(res))
        code, text, _ = run(capsys, "eval", "--gt", str(out / "gt.txt"),
                            "--res", str(res), "--format", "json")
        assert code == 0
        reports = json.loads(text)
        assert reports[0]["fp"] == 0 and reports[0]["fn"] == 0


class TestPipeline:
    def test_zero_noise_pipeline_prints_perfect_mota(self, capsys, tmp_path):
        code, out, _ = run(capsys, "pipeline", "--seed", "7", "--frames", "100",
                           "--targets", "8", "--out", str(tmp_path / "run"))
        assert code == 0
        row = [ln for ln in out.splitlines() if ln.startswith("sim-7")][0]
        cells = row.split()
        assert cells[1] == "100.0"  # MOTA
        assert cells[2] == "100.0"  # IDF1
        assert cells[-1] == "0"  # IDS

    def test_pipeline_deterministic_output(self, capsys, tmp_path):
        outputs = []
        for _ in range(2):
            code, out, _ = run(capsys, "pipeline", "--seed", "11", "--frames", "30",
                               "--targets", "4", "--drop-prob", "0.1",
                               "--fp-rate", "0.3", "--format", "csv")
            assert code == 0
            outputs.append(out)
        assert outputs[0] == outputs[1]


class TestEvalReports:
    @pytest.mark.parametrize(
        "fixture,totals",
        [
            ("mot16_supp_table1.json",
             ("67.6", "57.2", "78.4", "32.9%", "23.1%", "8934", "48305", "1897")),
            ("mot17_supp_table2.json",
             ("66.6", "57.4", "78.2", "32.2%", "24.2%", "7428", "53497", "1843")),
        ],
    )
    def test_fixture_totals_match_published_row(self, capsys, fixture, totals):
        code, out, _ = run(capsys, "eval", "--reports", str(DATA / fixture))
        assert code == 0
        total_line = [ln for ln in out.splitlines() if ln.startswith("TOTAL")][0]
        assert tuple(total_line.split()[1:]) == totals

    def test_reports_conflicts_with_gt(self, capsys):
        code, _, _ = run(capsys, "eval", "--reports", str(DATA / "mot16_supp_table1.json"),
                         "--gt", "x")
        assert code == 1


class TestAnchorsCommand:
    def test_prints_k_scales(self, capsys, tmp_path):
        out = tmp_path / "seq"
        run(capsys, "simulate", "--seed", "8", "--frames", "30", "--targets", "6",
            "--out", str(out))
        code, text, _ = run(capsys, "anchors", "--gt", str(out / "gt.txt"),
                            "--k", "3", "--seed", "1")
        assert code == 0
        lines = text.strip().splitlines()
        assert len(lines) == 3
        scales = [float(v) for v in lines]
        assert scales == sorted(scales)

    def test_k_too_large_exit_1(self, capsys, tmp_path):
        gt = tmp_path / "gt.txt"
        gt.write_text("1,1,0,0,10,10,1,1,1.0\n")
        code, _, _ = run(capsys, "anchors", "--gt", str(gt), "--k", "5", "--seed", "0")
        assert code == 1


class TestGradcheckCommand:
    def test_passes_and_reports(self, capsys):
        code, out, _ = run(capsys, "gradcheck", "--seed", "1", "--instances", "10")
        assert code == 0
        assert "pass" in out

    def test_impossible_tolerance_fails_nonzero(self, capsys):
        code, out, _ = run(capsys, "gradcheck", "--seed", "1", "--instances", "2",
                           "--tolerance", "1e-18")
        assert code == 1
        assert "FAIL" in out
