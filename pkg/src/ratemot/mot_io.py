"""Reading and writing MOTChallenge-style sequence data.

All files are plain comma-separated text. Ground truth and result rows share
the layout ``frame,id,x,y,w,h,conf,...``; boxes are top-left based with
continuous pixel coordinates. Sequence metadata lives in a ``seqinfo.txt``
file of ``key=value`` lines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable


class ParseError(ValueError):
    """A text file could not be parsed; the message names the line."""


class ValidationError(ValueError):
    """Parsed data violates a structural requirement."""


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box: top-left corner plus width and height."""

    x: float
    y: float
    w: float
    h: float

    @property
    def cx(self) -> float:
        return self.x + self.w / 2.0

    @property
    def cy(self) -> float:
        return self.y + self.h / 2.0

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class GtEntry:
    frame: int
    identity: int
    box: BoundingBox
    conf: float = 1.0
    visibility_flag: int = 1


@dataclass
class Sequence:
    """A source video: metadata plus its ground-truth annotations."""

    name: str
    fps: float
    width: int
    height: int
    length: int
    gt: list[GtEntry] = field(default_factory=list)

    def gt_by_frame(self) -> dict[int, list[GtEntry]]:
        frames: dict[int, list[GtEntry]] = {}
        for entry in self.gt:
            frames.setdefault(entry.frame, []).append(entry)
        return frames

    def identities(self) -> set[int]:
        return {entry.identity for entry in self.gt}


@dataclass
class TrackResult:
    """Tracker output: one row per (frame, identity) with a box and score."""

    rows: list[tuple[int, int, BoundingBox, float]] = field(default_factory=list)

    def add(self, frame: int, identity: int, box: BoundingBox, conf: float) -> None:
        self.rows.append((frame, identity, box, conf))

    def by_frame(self) -> dict[int, list[tuple[int, BoundingBox, float]]]:
        frames: dict[int, list[tuple[int, BoundingBox, float]]] = {}
        for frame, identity, box, conf in self.rows:
            frames.setdefault(frame, []).append((identity, box, conf))
        return frames

    def validate(self) -> None:
        seen: set[tuple[int, int]] = set()
        for frame, identity, box, conf in self.rows:
            key = (frame, identity)
            if key in seen:
                raise ValidationError(
                    f"duplicate result row for frame {frame}, identity {identity}"
                )
            seen.add(key)
            for value in (*box.as_tuple(), conf):
                if not math.isfinite(value):
                    raise ValidationError(
                        f"non-finite value in result row for frame {frame}"
                    )


def fmt_num(value: float) -> str:
    """Format a number with at most six decimals and no trailing zeros."""
    if not math.isfinite(value):
        raise ValidationError(f"cannot format non-finite value {value!r}")
    text = f"{value:.6f}".rstrip("0").rstrip(".")
    if text in ("-0", ""):
        text = "0"
    return text


def _split_row(line: str, lineno: int, min_fields: int) -> list[str]:
    parts = [part.strip() for part in line.split(",")]
    if len(parts) < min_fields:
        raise ParseError(
            f"line {lineno}: expected at least {min_fields} fields, got {len(parts)}"
        )
    return parts


def _parse_float(token: str, lineno: int, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"line {lineno}: bad {what} value {token!r}") from None


def _parse_int(token: str, lineno: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"line {lineno}: bad {what} value {token!r}") from None


def parse_gt(text: str, include_zero_conf: bool = False) -> list[GtEntry]:
    """Parse ground-truth rows ``frame,id,x,y,w,h,conf[,class[,visibility]]``.

    Rows with conf == 0 are ignored markers unless ``include_zero_conf``.
    Duplicate (frame, identity) pairs and non-positive box sizes raise
    ValidationError.
    """
    entries: list[GtEntry] = []
    seen: set[tuple[int, int]] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = _split_row(line, lineno, 7)
        frame = _parse_int(parts[0], lineno, "frame")
        identity = _parse_int(parts[1], lineno, "identity")
        x = _parse_float(parts[2], lineno, "x")
        y = _parse_float(parts[3], lineno, "y")
        w = _parse_float(parts[4], lineno, "w")
        h = _parse_float(parts[5], lineno, "h")
        conf = _parse_float(parts[6], lineno, "conf")
        if conf == 0 and not include_zero_conf:
            continue
        if w <= 0 or h <= 0:
            raise ValidationError(f"line {lineno}: non-positive box size {w}x{h}")
        key = (frame, identity)
        if key in seen:
            raise ValidationError(
                f"line {lineno}: duplicate entry for frame {frame}, identity {identity}"
            )
        seen.add(key)
        visibility = 1
        if len(parts) >= 9 and parts[8] != "":
            visibility = 1 if _parse_float(parts[8], lineno, "visibility") > 0 else 0
        entries.append(GtEntry(frame, identity, BoundingBox(x, y, w, h), conf, visibility))
    entries.sort(key=lambda e: (e.frame, e.identity))
    return entries


def write_gt(entries: Iterable[GtEntry]) -> str:
    lines = []
    for entry in sorted(entries, key=lambda e: (e.frame, e.identity)):
        box = entry.box
        lines.append(
            f"{entry.frame},{entry.identity},{fmt_num(box.x)},{fmt_num(box.y)},"
            f"{fmt_num(box.w)},{fmt_num(box.h)},{fmt_num(entry.conf)},1,"
            f"{entry.visibility_flag}"
        )
    return "\n".join(lines) + ("\n" if lines else "")


def parse_det(text: str) -> dict[int, list[tuple[BoundingBox, float]]]:
    """Parse detection rows ``frame,-1,x,y,w,h,conf`` into per-frame lists."""
    frames: dict[int, list[tuple[BoundingBox, float]]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = _split_row(line, lineno, 7)
        frame = _parse_int(parts[0], lineno, "frame")
        x = _parse_float(parts[2], lineno, "x")
        y = _parse_float(parts[3], lineno, "y")
        w = _parse_float(parts[4], lineno, "w")
        h = _parse_float(parts[5], lineno, "h")
        conf = _parse_float(parts[6], lineno, "conf")
        if w <= 0 or h <= 0:
            raise ValidationError(f"line {lineno}: non-positive box size {w}x{h}")
        frames.setdefault(frame, []).append((BoundingBox(x, y, w, h), conf))
    return frames


def write_det(frames: dict[int, list[tuple[BoundingBox, float]]]) -> str:
    lines = []
    for frame in sorted(frames):
        for box, conf in frames[frame]:
            lines.append(
                f"{frame},-1,{fmt_num(box.x)},{fmt_num(box.y)},{fmt_num(box.w)},"
                f"{fmt_num(box.h)},{fmt_num(conf)}"
            )
    return "\n".join(lines) + ("\n" if lines else "")


def parse_results(text: str) -> TrackResult:
    """Parse tracker output rows ``frame,id,x,y,w,h,conf,-1,-1,-1``."""
    result = TrackResult()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = _split_row(line, lineno, 7)
        frame = _parse_int(parts[0], lineno, "frame")
        identity = _parse_int(parts[1], lineno, "identity")
        x = _parse_float(parts[2], lineno, "x")
        y = _parse_float(parts[3], lineno, "y")
        w = _parse_float(parts[4], lineno, "w")
        h = _parse_float(parts[5], lineno, "h")
        conf = _parse_float(parts[6], lineno, "conf")
        if w <= 0 or h <= 0:
            raise ValidationError(f"line {lineno}: non-positive box size {w}x{h}")
        result.add(frame, identity, BoundingBox(x, y, w, h), conf)
    result.validate()
    result.rows.sort(key=lambda r: (r[0], r[1]))
    return result


def write_results(result: TrackResult) -> str:
    """Serialize a TrackResult sorted by frame then identity."""
    result.validate()
    lines = []
    for frame, identity, box, conf in sorted(result.rows, key=lambda r: (r[0], r[1])):
        lines.append(
            f"{frame},{identity},{fmt_num(box.x)},{fmt_num(box.y)},{fmt_num(box.w)},"
            f"{fmt_num(box.h)},{fmt_num(conf)},-1,-1,-1"
        )
    return "\n".join(lines) + ("\n" if lines else "")


def sequence_stats(seq: Sequence) -> tuple[int, int]:
    """Return (frame count, distinct identity count)."""
    return seq.length, len(seq.identities())


_INT_INFO_KEYS = {"width", "height", "length", "k", "offset"}
_FLOAT_INFO_KEYS = {"fps", "effective_fps"}


def read_info(text: str) -> dict[str, object]:
    """Parse a key=value info file; numeric keys are converted."""
    info: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ParseError(f"line {lineno}: expected key=value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key in _INT_INFO_KEYS:
            info[key] = _parse_int(value, lineno, key)
        elif key in _FLOAT_INFO_KEYS:
            info[key] = _parse_float(value, lineno, key)
        else:
            info[key] = value
    return info


def write_info(info: dict[str, object]) -> str:
    lines = []
    for key, value in info.items():
        if isinstance(value, float):
            lines.append(f"{key}={fmt_num(value)}")
        else:
            lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def save_sequence(root: Path | str, seq: Sequence, extra: dict[str, object] | None = None) -> Path:
    """Write ``<root>/<name>/seqinfo.txt`` and ``gt/gt.txt``; returns the dir."""
    seq_dir = Path(root) / seq.name
    (seq_dir / "gt").mkdir(parents=True, exist_ok=True)
    info: dict[str, object] = {
        "name": seq.name,
        "fps": float(seq.fps),
        "width": seq.width,
        "height": seq.height,
        "length": seq.length,
    }
    if extra:
        info.update(extra)
    (seq_dir / "seqinfo.txt").write_text(write_info(info))
    (seq_dir / "gt" / "gt.txt").write_text(write_gt(seq.gt))
    return seq_dir


def load_sequence(seq_dir: Path | str) -> Sequence:
    """Read a sequence directory written by :func:`save_sequence`."""
    seq_dir = Path(seq_dir)
    info_path = seq_dir / "seqinfo.txt"
    if not info_path.is_file():
        raise ParseError(f"missing info file {info_path}")
    info = read_info(info_path.read_text())
    for key in ("name", "fps", "width", "height", "length"):
        if key not in info:
            raise ValidationError(f"{info_path}: missing required key {key!r}")
    gt_path = seq_dir / "gt" / "gt.txt"
    gt = parse_gt(gt_path.read_text()) if gt_path.is_file() else []
    return Sequence(
        name=str(info["name"]),
        fps=float(info["fps"]),  # type: ignore[arg-type]
        width=int(info["width"]),  # type: ignore[arg-type]
        height=int(info["height"]),  # type: ignore[arg-type]
        length=int(info["length"]),  # type: ignore[arg-type]
        gt=gt,
    )
