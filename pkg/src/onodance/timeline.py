"""Timed word annotations (caption files) and frame-aligned conditioning.

Annotations come from SRT/SBV caption files or a simple CSV; each covered
frame row of the conditioning matrix carries the word's 43-dim vector,
every other row is exactly zero.
"""
from __future__ import annotations

import csv
import io
import logging
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DecodeError, MalformedTimestamp, NegativeStart
from .symbolism import (
    N_SCALES,
    QuantificationDictionary,
    RuleTable,
    lookup_or_quantify,
)

logger = logging.getLogger(__name__)

CONDITIONING_MAGIC = b"ONOC"
CONDITIONING_VERSION = 1


@dataclass(frozen=True)
class TimedAnnotation:
    word: str
    start_s: float
    end_s: float

    def __post_init__(self):
        if not (np.isfinite(self.start_s) and np.isfinite(self.end_s)):
            raise ValueError("annotation times must be finite")
        if self.start_s < 0 or self.end_s <= self.start_s:
            raise ValueError(
                f"need 0 <= start < end, got [{self.start_s}, {self.end_s}]")


@dataclass
class CaptionDoc:
    annotations: list
    empty_cues: int = 0


@dataclass
class ConditioningSequence:
    fps: float
    frames: np.ndarray  # (n_frames, 43) float32

    def __post_init__(self):
        self.frames = np.ascontiguousarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 2 or self.frames.shape[1] != N_SCALES:
            raise ValueError(f"conditioning must be (n, {N_SCALES}), "
                             f"got {self.frames.shape}")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


_SRT_TIME = re.compile(
    r"^\s*(\d+):(\d{1,2}):(\d{1,2})[,.](\d{1,3})\s*$")
_SBV_TIME = re.compile(
    r"^\s*(\d+):(\d{1,2}):(\d{1,2})\.(\d{1,3})\s*$")


def _parse_stamp(text: str, pattern: re.Pattern, line_no: int) -> float:
    m = pattern.match(text)
    if not m:
        raise MalformedTimestamp(line_no, text.strip())
    h, mi, s, ms = m.groups()
    return int(h) * 3600 + int(mi) * 60 + int(s) + int(ms.ljust(3, "0")) / 1000.0


def _cue_word(lines) -> str:
    # Multi-word cues collapse to a single word string.
    return "".join("".join(line.split()) for line in lines)


def _parse_srt(text: str) -> CaptionDoc:
    annotations, empty = [], 0
    blocks: list[tuple[int, list[str]]] = []
    current: list[str] = []
    start_line = 1
    for no, line in enumerate(text.splitlines(), 1):
        if line.strip():
            if not current:
                start_line = no
            current.append(line)
        elif current:
            blocks.append((start_line, current))
            current = []
    if current:
        blocks.append((start_line, current))

    for block_line, lines in blocks:
        idx = 0
        # Optional numeric cue index.
        if lines and lines[0].strip().isdigit():
            idx = 1
        if idx >= len(lines) or "-->" not in lines[idx]:
            raise MalformedTimestamp(block_line + idx,
                                     lines[idx].strip() if idx < len(lines) else "")
        time_line_no = block_line + idx
        left, _, right = lines[idx].partition("-->")
        start = _parse_stamp(left, _SRT_TIME, time_line_no)
        end = _parse_stamp(right, _SRT_TIME, time_line_no)
        word = _cue_word(lines[idx + 1:])
        if not word:
            empty += 1
            logger.warning("empty cue at line %d skipped", block_line)
            continue
        annotations.append(TimedAnnotation(word, start, end))
    return CaptionDoc(annotations, empty)


def _parse_sbv(text: str) -> CaptionDoc:
    annotations, empty = [], 0
    current_times = None
    current_lines: list[str] = []
    current_line_no = 0

    def flush():
        nonlocal empty
        if current_times is None:
            return
        word = _cue_word(current_lines)
        if not word:
            empty += 1
            logger.warning("empty cue at line %d skipped", current_line_no)
            return
        annotations.append(TimedAnnotation(word, *current_times))

    for no, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped:
            flush()
            current_times, current_lines = None, []
            continue
        if current_times is None:
            if "," not in stripped:
                raise MalformedTimestamp(no, stripped)
            left, _, right = stripped.partition(",")
            current_times = (_parse_stamp(left, _SBV_TIME, no),
                             _parse_stamp(right, _SBV_TIME, no))
            current_line_no = no
        else:
            current_lines.append(line)
    flush()
    return CaptionDoc(annotations, empty)


def _parse_csv(text: str) -> CaptionDoc:
    annotations, empty = [], 0
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip().lower() for h in header[:3]] != ["word", "start_s", "end_s"]:
        raise MalformedTimestamp(1, "expected header word,start_s,end_s")
    for no, row in enumerate(reader, 2):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) < 3:
            raise MalformedTimestamp(no, ",".join(row))
        word = "".join(row[0].split())
        try:
            start, end = float(row[1]), float(row[2])
        except ValueError:
            raise MalformedTimestamp(no, ",".join(row)) from None
        if not word:
            empty += 1
            logger.warning("empty cue at line %d skipped", no)
            continue
        annotations.append(TimedAnnotation(word, start, end))
    return CaptionDoc(annotations, empty)


_PARSERS = {"srt": _parse_srt, "sbv": _parse_sbv, "csv": _parse_csv}
CAPTION_FORMATS = tuple(_PARSERS)


def parse_captions(content: bytes, format: str) -> CaptionDoc:
    """Parse caption bytes into annotations sorted by start time."""
    if format not in _PARSERS:
        raise ValueError(f"unknown caption format {format!r}")
    try:
        text = content.decode("utf-8")
    except UnicodeDecodeError as e:
        raise DecodeError(f"caption file is not UTF-8: {e}") from e
    if text.startswith("﻿"):
        text = text[1:]
    doc = _PARSERS[format](text)
    doc.annotations.sort(key=lambda a: a.start_s)
    return doc


def build_sequence(annotations, n_frames: int, fps: float,
                   dictionary: QuantificationDictionary, table: RuleTable,
                   inclusive_end: bool = False) -> ConditioningSequence:
    """Expand annotations into an (n_frames, 43) matrix; zero where silent.

    Later annotations overwrite earlier ones on overlap. Intervals are
    half-open [round(start*fps), round(end*fps)) unless inclusive_end.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    if fps <= 0:
        raise ValueError("fps must be positive")
    frames = np.zeros((n_frames, N_SCALES), dtype=np.float32)
    ordered = sorted(annotations, key=lambda a: a.start_s)
    prev_end = None
    for ann in ordered:
        start = int(round(ann.start_s * fps))
        end = int(round(ann.end_s * fps))
        if inclusive_end:
            end += 1
        if prev_end is not None and start < prev_end:
            logger.warning("annotation %r at %.3fs overlaps the previous cue; "
                           "it overwrites the shared frames", ann.word, ann.start_s)
        prev_end = end
        lo, hi = max(start, 0), min(end, n_frames)
        if lo >= n_frames or hi <= 0:
            logger.warning("annotation %r [%.3f, %.3f]s lies outside the "
                           "%d-frame sequence; clipped away", ann.word,
                           ann.start_s, ann.end_s, n_frames)
            continue
        if start < 0 or end > n_frames:
            logger.warning("annotation %r clipped to frames [%d, %d)",
                           ann.word, lo, hi)
        vec = lookup_or_quantify(ann.word, dictionary, table)
        frames[lo:hi, :] = vec.astype(np.float32)
    return ConditioningSequence(fps=fps, frames=frames)


def window(seq: ConditioningSequence, start_frame: int, length: int) -> np.ndarray:
    """Length-row slice starting at start_frame, zero-padded past the end."""
    if start_frame < 0:
        raise NegativeStart(f"window start {start_frame} < 0")
    if length < 1:
        raise ValueError("window length must be >= 1")
    out = np.zeros((length, N_SCALES), dtype=np.float32)
    lo = min(start_frame, seq.n_frames)
    hi = min(start_frame + length, seq.n_frames)
    if hi > lo:
        out[: hi - lo] = seq.frames[lo:hi]
    return out


def save_conditioning(seq: ConditioningSequence, path: Path) -> None:
    """Binary format: 16-byte header (magic, version, n_frames, dims) then
    row-major little-endian float32."""
    header = struct.pack("<4sIII", CONDITIONING_MAGIC, CONDITIONING_VERSION,
                         seq.n_frames, N_SCALES)
    data = seq.frames.astype("<f4", copy=False).tobytes(order="C")
    Path(path).write_bytes(header + data)


def load_conditioning(path: Path, fps: float = 60.0) -> ConditioningSequence:
    blob = Path(path).read_bytes()
    if len(blob) < 16:
        raise DecodeError("conditioning file shorter than its header")
    magic, version, n_frames, dims = struct.unpack("<4sIII", blob[:16])
    if magic != CONDITIONING_MAGIC:
        raise DecodeError(f"bad magic {magic!r}")
    if version != CONDITIONING_VERSION:
        raise DecodeError(f"unsupported conditioning version {version}")
    if dims != N_SCALES:
        raise DecodeError(f"expected {N_SCALES} dims, got {dims}")
    expected = n_frames * dims * 4
    payload = blob[16:]
    if len(payload) != expected:
        raise DecodeError(f"expected {expected} payload bytes, got {len(payload)}")
    frames = np.frombuffer(payload, dtype="<f4").reshape(n_frames, dims).copy()
    return ConditioningSequence(fps=fps, frames=frames)
