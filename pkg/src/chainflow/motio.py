"""Readers and writers for MOTChallenge-style files and the pairs format.

Four formats: ground truth (frame,id,x,y,w,h,conf,class,visibility), results
(frame,id,x,y,w,h,conf,-1,-1,-1), sequence info (INI) and the box-pair
interchange CSV (t,x1,y1,w1,h1,x2,y2,w2,h2,cls_score,id_score). Files are
UTF-8 with LF line endings and no header rows; coordinates are serialized
with two decimals so written files are byte-reproducible. Frames (and node
indices) are 1-based in files and 0-based in memory; the conversion lives
entirely in this module.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .chaining import Node
from .geometry import Box
from .postprocess import BoxPair
from .supervision import GroundTruthFrame


class ParseError(ValueError):
    """Malformed input file; the message carries the path and line number."""


@dataclass(frozen=True)
class SequenceInfo:
    name: str
    frame_count: int
    image_w: int
    image_h: int
    frame_rate: float

    def __post_init__(self) -> None:
        if self.frame_count <= 0 or self.image_w <= 0 or self.image_h <= 0:
            raise ValueError("sequence counts and dimensions must be positive")


def _split_row(path: Path, line_no: int, line: str, n_fields: int) -> list[str]:
    fields = line.split(",")
    if len(fields) != n_fields:
        raise ParseError(
            f"{path}:{line_no}: expected {n_fields} comma-separated fields, got {len(fields)}"
        )
    return fields


def _parse_float(path: Path, line_no: int, text: str, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"{path}:{line_no}: {what} is not a number: {text!r}") from None


def _parse_int(path: Path, line_no: int, text: str, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"{path}:{line_no}: {what} is not an integer: {text!r}") from None


def _read_lines(path: Path) -> list[tuple[int, str]]:
    with open(path, "r", encoding="utf-8") as fh:
        return [
            (i, line.rstrip("\n")) for i, line in enumerate(fh, start=1) if line.strip()
        ]


def parse_gt(path: str | Path, min_visibility: float = 0.1) -> list[GroundTruthFrame]:
    """Read a ground-truth file, keeping boxes whose visibility exceeds the threshold."""
    path = Path(path)
    rows: list[tuple[int, int, Box, float]] = []
    for line_no, line in _read_lines(path):
        f = _split_row(path, line_no, line, 9)
        frame = _parse_int(path, line_no, f[0], "frame") - 1
        identity = _parse_int(path, line_no, f[1], "identity")
        x = _parse_float(path, line_no, f[2], "x")
        y = _parse_float(path, line_no, f[3], "y")
        w = _parse_float(path, line_no, f[4], "w")
        h = _parse_float(path, line_no, f[5], "h")
        _parse_float(path, line_no, f[6], "conf")
        _parse_float(path, line_no, f[7], "class")
        visibility = _parse_float(path, line_no, f[8], "visibility")
        if frame < 0:
            raise ParseError(f"{path}:{line_no}: frame numbers are 1-based")
        if w <= 0 or h <= 0:
            raise ParseError(f"{path}:{line_no}: box size must be positive, got w={w}, h={h}")
        if visibility > min_visibility:
            rows.append((frame, identity, Box(x, y, w, h), visibility))

    rows.sort(key=lambda r: (r[0], r[1]))
    grouped: dict[int, list[tuple[int, Box, float]]] = {}
    for frame, identity, box, visibility in rows:
        grouped.setdefault(frame, []).append((identity, box, visibility))
    frames: list[GroundTruthFrame] = []
    for frame in sorted(grouped):
        identities = [r[0] for r in grouped[frame]]
        try:
            frames.append(
                GroundTruthFrame(
                    frame,
                    [r[1] for r in grouped[frame]],
                    identities,
                    [r[2] for r in grouped[frame]],
                )
            )
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}") from None
    return frames


def write_gt(path: str | Path, sequence: list[GroundTruthFrame]) -> None:
    """Write ground-truth frames in MOTChallenge layout (conf and class fixed to 1)."""
    rows = []
    for fr in sequence:
        for box, identity, visibility in zip(fr.boxes, fr.identities, fr.visibilities):
            rows.append((fr.frame + 1, identity, box, visibility))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for frame, identity, box, visibility in rows:
            fh.write(
                f"{frame},{identity},{box.x:.2f},{box.y:.2f},{box.w:.2f},{box.h:.2f},"
                f"1,1,{visibility:.6f}\n"
            )


def parse_results(path: str | Path) -> dict[int, dict[int, Box]]:
    """Read a tracker result file into a frame -> identity -> box table."""
    path = Path(path)
    table: dict[int, dict[int, Box]] = {}
    for line_no, line in _read_lines(path):
        f = _split_row(path, line_no, line, 10)
        frame = _parse_int(path, line_no, f[0], "frame") - 1
        identity = _parse_int(path, line_no, f[1], "identity")
        x = _parse_float(path, line_no, f[2], "x")
        y = _parse_float(path, line_no, f[3], "y")
        w = _parse_float(path, line_no, f[4], "w")
        h = _parse_float(path, line_no, f[5], "h")
        if frame < 0:
            raise ParseError(f"{path}:{line_no}: frame numbers are 1-based")
        if w <= 0 or h <= 0:
            raise ParseError(f"{path}:{line_no}: box size must be positive, got w={w}, h={h}")
        per_frame = table.setdefault(frame, {})
        if identity in per_frame:
            raise ParseError(f"{path}:{line_no}: identity {identity} repeated in frame {frame + 1}")
        per_frame[identity] = Box(x, y, w, h)
    return table


def write_results(path: str | Path, trajectories: dict[int, dict[int, Box]]) -> None:
    """Write trajectories as result rows sorted by (frame, id), two-decimal coordinates."""
    rows = []
    for frame in sorted(trajectories):
        for identity in sorted(trajectories[frame]):
            rows.append((frame + 1, identity, trajectories[frame][identity]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for frame, identity, box in rows:
            fh.write(
                f"{frame},{identity},{box.x:.2f},{box.y:.2f},{box.w:.2f},{box.h:.2f},"
                f"1,-1,-1,-1\n"
            )


def parse_pairs(path: str | Path) -> list[Node]:
    """Read a pairs CSV, grouping rows into nodes by ascending first-frame index."""
    path = Path(path)
    grouped: dict[int, list[BoxPair]] = {}
    for line_no, line in _read_lines(path):
        f = _split_row(path, line_no, line, 11)
        t = _parse_int(path, line_no, f[0], "node frame") - 1
        if t < 0:
            raise ParseError(f"{path}:{line_no}: node frame numbers are 1-based")
        coords = [_parse_float(path, line_no, v, "coordinate") for v in f[1:9]]
        cls_score = _parse_float(path, line_no, f[9], "cls_score")
        id_score = _parse_float(path, line_no, f[10], "id_score")
        for what, score in (("cls_score", cls_score), ("id_score", id_score)):
            if not (0.0 <= score <= 1.0):
                raise ParseError(f"{path}:{line_no}: {what} outside [0, 1]: {score}")
        if min(coords[2], coords[3], coords[6], coords[7]) <= 0:
            raise ParseError(f"{path}:{line_no}: box size must be positive")
        grouped.setdefault(t, []).append(
            BoxPair(Box(*coords[0:4]), Box(*coords[4:8]), cls_score, id_score)
        )
    return [Node(t, grouped[t]) for t in sorted(grouped)]


def write_pairs(path: str | Path, nodes: list[Node]) -> None:
    """Write nodes as pairs CSV rows; two-decimal coordinates, six-decimal scores."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for node in nodes:
            for p in node.pairs:
                a, b = p.first, p.second
                fh.write(
                    f"{node.t + 1},{a.x:.2f},{a.y:.2f},{a.w:.2f},{a.h:.2f},"
                    f"{b.x:.2f},{b.y:.2f},{b.w:.2f},{b.h:.2f},"
                    f"{p.cls_score:.6f},{p.id_score:.6f}\n"
                )


def parse_seqinfo(path: str | Path) -> SequenceInfo:
    """Read a seqinfo.ini file's [Sequence] section."""
    path = Path(path)
    parser = configparser.ConfigParser()
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise ParseError(f"{path}: cannot read sequence info file")
    if not parser.has_section("Sequence"):
        raise ParseError(f"{path}: missing [Sequence] section")
    section = parser["Sequence"]
    values = {}
    for key in ("name", "seqLength", "imWidth", "imHeight", "frameRate"):
        if key not in section:
            raise ParseError(f"{path}: missing key {key!r} in [Sequence]")
        values[key] = section[key]
    try:
        return SequenceInfo(
            name=values["name"],
            frame_count=int(values["seqLength"]),
            image_w=int(values["imWidth"]),
            image_h=int(values["imHeight"]),
            frame_rate=float(values["frameRate"]),
        )
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


def write_seqinfo(path: str | Path, info: SequenceInfo) -> None:
    """Write a seqinfo.ini file."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            "[Sequence]\n"
            f"name={info.name}\n"
            f"seqLength={info.frame_count}\n"
            f"imWidth={info.image_w}\n"
            f"imHeight={info.image_h}\n"
            f"frameRate={info.frame_rate:g}\n"
        )
