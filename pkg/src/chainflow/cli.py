"""Command-line surface: simulate, track, eval, anchors, gradcheck, pipeline.

Exit codes: 0 on success, 1 on validation failure (bad flags, failed
checks), 2 on I/O errors (missing or malformed files). All tracking
defaults follow the library defaults: retention sigma 10, IoU matching
threshold 0.5, soft-NMS threshold 0.7, confidence threshold 0.4,
ground-truth visibility cut 0.1.
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
from pathlib import Path

from . import anchors as anchors_mod
from . import metrics as metrics_mod
from . import motio
from . import simulator as sim_mod
from .chaining import TrackerParams, fill_trajectory_gaps, run_tracker
from .metrics import ClearReport, aggregate, clear_mot, frame_table
from .supervision import gradient_check

TABLE_COLUMNS = ("MOTA", "IDF1", "MOTP", "MT", "ML", "FP", "FN", "IDS")


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits with code 1 on argument errors."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _ratio(text: str) -> float:
    value = float(text)
    if not (0.0 <= value <= 1.0):
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be a non-negative integer, got {text}")
    return value


def _nonneg_float(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return value


def _add_noise_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--center-jitter", type=_nonneg_float, default=0.0,
                     help="std of Gaussian center jitter on detections, pixels (default 0)")
    sub.add_argument("--size-jitter", type=_nonneg_float, default=0.0,
                     help="std of Gaussian size jitter on detections, pixels (default 0)")
    sub.add_argument("--drop-prob", type=_ratio, default=0.0,
                     help="independent probability of dropping a true pair (default 0)")
    sub.add_argument("--fp-rate", type=_nonneg_float, default=0.0,
                     help="Poisson rate of false-positive pairs per node (default 0)")


def _add_tracker_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--sigma", type=_nonneg_int, default=10,
                     help="retention window: missed nodes a tracklet survives (default 10)")
    sub.add_argument("--iou", type=_ratio, default=0.5,
                     help="IoU threshold for chaining matches (default 0.5)")
    sub.add_argument("--nms", type=_ratio, default=0.7,
                     help="first-box IoU threshold of linear soft-NMS (default 0.7)")
    sub.add_argument("--conf", type=_ratio, default=0.4,
                     help="classification score cut after soft-NMS, inclusive (default 0.4)")
    sub.add_argument("--fill-gaps", action="store_true",
                     help="emit linearly interpolated boxes across retention gaps (default off)")


def build_parser() -> _Parser:
    parser = _Parser(prog="chainflow", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p_sim = sub.add_parser("simulate", help="generate a synthetic sequence and detections")
    p_sim.add_argument("--seed", type=int, default=0, help="world/noise RNG seed (default 0)")
    p_sim.add_argument("--frames", type=_positive_int, default=100)
    p_sim.add_argument("--targets", type=_nonneg_int, default=8)
    p_sim.add_argument("--width", type=_positive_int, default=1920)
    p_sim.add_argument("--height", type=_positive_int, default=1080)
    p_sim.add_argument("--entry-prob", type=_ratio, default=0.0,
                       help="per-frame probability of a new target entering (default 0)")
    p_sim.add_argument("--exit-prob", type=_ratio, default=0.0,
                       help="per-frame probability of a target leaving (default 0)")
    p_sim.add_argument("--name", default=None, help="sequence name (default sim-<seed>)")
    p_sim.add_argument("--out", required=True,
                       help="output directory for gt.txt, seqinfo.ini and pairs.csv")
    _add_noise_flags(p_sim)
    p_sim.set_defaults(func=_cmd_simulate)

    p_track = sub.add_parser("track", help="chain box pairs into trajectories")
    p_track.add_argument("--pairs", required=True, help="pairs CSV produced by simulate")
    p_track.add_argument("--out", required=True, help="result file to write")
    _add_tracker_flags(p_track)
    p_track.set_defaults(func=_cmd_track)

    p_eval = sub.add_parser("eval", help="score results against ground truth")
    p_eval.add_argument("--gt", help="gt.txt file or MOTChallenge-style directory")
    p_eval.add_argument("--res", help="result file or directory of <sequence>.txt files")
    p_eval.add_argument("--reports", help="JSON file of per-sequence report tallies to aggregate")
    p_eval.add_argument("--iou", type=_ratio, default=0.5,
                        help="IoU threshold for box matches (default 0.5)")
    p_eval.add_argument("--min-visibility", type=_ratio, default=0.1,
                        help="keep ground-truth boxes with visibility above this (default 0.1)")
    p_eval.add_argument("--format", choices=("table", "csv", "json"), default="table")
    p_eval.set_defaults(func=_cmd_eval)

    p_anchors = sub.add_parser("anchors", help="k-means anchor scales from ground truth")
    p_anchors.add_argument("--gt", required=True, help="gt.txt file")
    p_anchors.add_argument("--k", type=_positive_int, default=5)
    p_anchors.add_argument("--seed", type=int, default=0)
    p_anchors.add_argument("--min-visibility", type=_ratio, default=0.1)
    p_anchors.set_defaults(func=_cmd_anchors)

    p_grad = sub.add_parser(
        "gradcheck",
        help="verify analytic loss gradients against finite differences",
        description="Compares analytic gradients of the regression and focal "
                    "terms with central finite differences. The classification "
                    "focal term is normalized by the positive-anchor count "
                    "(library default).")
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.add_argument("--instances", type=_positive_int, default=100)
    p_grad.add_argument("--step", type=_nonneg_float, default=1e-5)
    p_grad.add_argument("--tolerance", type=_nonneg_float, default=1e-5)
    p_grad.set_defaults(func=_cmd_gradcheck)

    p_pipe = sub.add_parser("pipeline", help="simulate, track and eval in one run")
    p_pipe.add_argument("--seed", type=int, default=0)
    p_pipe.add_argument("--frames", type=_positive_int, default=100)
    p_pipe.add_argument("--targets", type=_nonneg_int, default=8)
    p_pipe.add_argument("--width", type=_positive_int, default=1920)
    p_pipe.add_argument("--height", type=_positive_int, default=1080)
    p_pipe.add_argument("--entry-prob", type=_ratio, default=0.0)
    p_pipe.add_argument("--exit-prob", type=_ratio, default=0.0)
    p_pipe.add_argument("--name", default=None)
    p_pipe.add_argument("--out", default=None,
                        help="directory for intermediate files (default: temporary)")
    p_pipe.add_argument("--min-visibility", type=_ratio, default=0.1)
    p_pipe.add_argument("--format", choices=("table", "csv", "json"), default="table")
    _add_noise_flags(p_pipe)
    _add_tracker_flags(p_pipe)
    p_pipe.set_defaults(func=_cmd_pipeline)

    return parser


def _simulate_into(args: argparse.Namespace, out_dir: Path) -> tuple[Path, Path, str]:
    """Run the simulator and write gt.txt, seqinfo.ini and pairs.csv."""
    name = args.name or f"sim-{args.seed}"
    cfg = sim_mod.WorldConfig(
        frames=args.frames,
        image_w=args.width,
        image_h=args.height,
        n_targets=args.targets,
        entry_prob=args.entry_prob,
        exit_prob=args.exit_prob,
    )
    noise = sim_mod.NoiseConfig(
        center_jitter_std=args.center_jitter,
        size_jitter_std=args.size_jitter,
        drop_prob=args.drop_prob,
        false_positive_rate=args.fp_rate,
    )
    sequence = sim_mod.gen_sequence(cfg, args.seed)
    nodes = sim_mod.corrupt_to_pairs(sequence, noise, args.seed + 1, args.width, args.height)

    out_dir.mkdir(parents=True, exist_ok=True)
    gt_path = out_dir / "gt.txt"
    pairs_path = out_dir / "pairs.csv"
    motio.write_gt(gt_path, sequence)
    motio.write_pairs(pairs_path, nodes)
    motio.write_seqinfo(
        out_dir / "seqinfo.ini",
        motio.SequenceInfo(name, args.frames, args.width, args.height, 30.0),
    )
    return gt_path, pairs_path, name


def _cmd_simulate(args: argparse.Namespace) -> int:
    _simulate_into(args, Path(args.out))
    return 0


def _tracker_params(args: argparse.Namespace) -> TrackerParams:
    return TrackerParams(
        iou_match_thresh=args.iou,
        sigma=args.sigma,
        nms_thresh=args.nms,
        conf_thresh=args.conf,
    )


def _cmd_track(args: argparse.Namespace) -> int:
    nodes = motio.parse_pairs(args.pairs)
    trajectories = run_tracker(nodes, _tracker_params(args))
    if args.fill_gaps:
        trajectories = fill_trajectory_gaps(trajectories)
    motio.write_results(args.out, trajectories)
    return 0


def _percent(value: float) -> str:
    return f"{value:.1f}"


def _print_reports(reports: list[ClearReport], fmt: str) -> None:
    rows = list(reports)
    if len(rows) > 1:
        rows.append(aggregate(rows, name="TOTAL"))
    if fmt == "json":
        print(json.dumps([r.to_dict() for r in rows], indent=2))
        return
    if fmt == "csv":
        print("sequence,mota,idf1,motp,mt,ml,fp,fn,ids")
        for r in rows:
            print(
                f"{r.name},{_percent(r.mota)},{_percent(r.idf1)},{_percent(r.motp)},"
                f"{_percent(r.mt)},{_percent(r.ml)},{r.fp},{r.fn},{r.ids}"
            )
        return
    name_width = max(len("Sequence"), max(len(r.name) for r in rows))
    header = ["Sequence".ljust(name_width)] + [c.rjust(8) for c in TABLE_COLUMNS]
    print("  ".join(header))
    for r in rows:
        cells = [
            r.name.ljust(name_width),
            _percent(r.mota).rjust(8),
            _percent(r.idf1).rjust(8),
            _percent(r.motp).rjust(8),
            (_percent(r.mt) + "%").rjust(8),
            (_percent(r.ml) + "%").rjust(8),
            str(r.fp).rjust(8),
            str(r.fn).rjust(8),
            str(r.ids).rjust(8),
        ]
        print("  ".join(cells))


def _discover_sequences(gt_root: Path, res_root: Path) -> list[tuple[str, Path, Path]]:
    found: list[tuple[str, Path, Path]] = []
    for entry in sorted(gt_root.iterdir()):
        if not entry.is_dir():
            continue
        gt_file = entry / "gt" / "gt.txt"
        if not gt_file.is_file():
            gt_file = entry / "gt.txt"
        if not gt_file.is_file():
            continue
        res_file = res_root / f"{entry.name}.txt"
        if not res_file.is_file():
            raise FileNotFoundError(f"no result file for sequence {entry.name}: {res_file}")
        found.append((entry.name, gt_file, res_file))
    if not found:
        raise FileNotFoundError(f"no sequences with gt.txt found under {gt_root}")
    return found


def _evaluate_file(name: str, gt_path: Path, res_path: Path, args: argparse.Namespace) -> ClearReport:
    gt = frame_table(motio.parse_gt(gt_path, args.min_visibility))
    hyp = motio.parse_results(res_path)
    return clear_mot(gt, hyp, args.iou, name=name)


def _cmd_eval(args: argparse.Namespace) -> int:
    if args.reports:
        if args.gt or args.res:
            raise ValueError("--reports cannot be combined with --gt/--res")
        with open(args.reports, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        reports = [ClearReport.from_dict(item) for item in data]
        if not reports:
            raise ValueError(f"{args.reports} contains no reports")
        _print_reports(reports, args.format)
        return 0
    if not args.gt or not args.res:
        raise ValueError("eval needs --gt and --res (or --reports)")
    gt_path, res_path = Path(args.gt), Path(args.res)
    if gt_path.is_dir():
        sequences = _discover_sequences(gt_path, res_path)
        reports = [_evaluate_file(n, g, r, args) for n, g, r in sequences]
    else:
        name = gt_path.parent.name or "sequence"
        reports = [_evaluate_file(name, gt_path, res_path, args)]
    _print_reports(reports, args.format)
    return 0


def _cmd_anchors(args: argparse.Namespace) -> int:
    sequence = motio.parse_gt(args.gt, args.min_visibility)
    boxes = [b for fr in sequence for b in fr.boxes]
    for scale in anchors_mod.kmeans_scales(boxes, args.k, args.seed):
        print(f"{scale:.6f}")
    return 0


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    worst, ok = gradient_check(
        seed=args.seed,
        n_instances=args.instances,
        step=args.step,
        tolerance=args.tolerance,
    )
    status = "pass" if ok else "FAIL"
    print(f"gradcheck {status}: worst relative error {worst:.3e} "
          f"over {args.instances} instances (tolerance {args.tolerance:g})")
    return 0 if ok else 1


def _cmd_pipeline(args: argparse.Namespace) -> int:
    if args.out is None:
        with tempfile.TemporaryDirectory(prefix="chainflow-") as tmp:
            return _run_pipeline(args, Path(tmp))
    return _run_pipeline(args, Path(args.out))


def _run_pipeline(args: argparse.Namespace, out_dir: Path) -> int:
    gt_path, pairs_path, name = _simulate_into(args, out_dir)
    nodes = motio.parse_pairs(pairs_path)
    trajectories = run_tracker(nodes, _tracker_params(args))
    if args.fill_gaps:
        trajectories = fill_trajectory_gaps(trajectories)
    res_path = out_dir / "res.txt"
    motio.write_results(res_path, trajectories)

    gt = frame_table(motio.parse_gt(gt_path, args.min_visibility))
    hyp = motio.parse_results(res_path)
    report = clear_mot(gt, hyp, args.iou, name=name)
    _print_reports([report], args.format)
    return 0


def run_cli(argv: list[str] | None = None) -> int:
    """Parse arguments and dispatch; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "command", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except motio.ParseError as exc:
        print(f"chainflow: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"chainflow: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"chainflow: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
