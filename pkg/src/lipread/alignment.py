"""Transcript parsing and per-frame phoneme/viseme labelling.

Frame numbers are 1-based and inclusive in files and in ``WordInterval``;
``FrameLabels`` sequences are plain 0-based Python sequences.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import (
    IntervalOutOfRange,
    MalformedLine,
    MissingFile,
    OverlappingIntervals,
    UnknownWord,
)
from .lexicon import SILENCE, PronunciationDict, VisemeMap

log = logging.getLogger(__name__)

DEFAULT_FRAMES = 74
UNLABELLED = 0


@dataclass(frozen=True)
class WordInterval:
    word: str
    start_frame: int
    end_frame: int

    def __post_init__(self):
        if self.start_frame > self.end_frame:
            raise ValueError(f"interval start {self.start_frame} > end {self.end_frame}")

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.start_frame + 1


@dataclass(frozen=True)
class Transcript:
    video_id: str
    intervals: tuple[WordInterval, ...] = ()
    total_frames: int = DEFAULT_FRAMES

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple(sorted(self.intervals, key=lambda iv: iv.start_frame)))
        prev = None
        for iv in self.intervals:
            if iv.start_frame < 1 or iv.end_frame > self.total_frames:
                raise IntervalOutOfRange(
                    f"{self.video_id}: interval {iv.word} [{iv.start_frame}, {iv.end_frame}] "
                    f"outside [1, {self.total_frames}]"
                )
            if prev is not None and iv.start_frame <= prev.end_frame:
                raise OverlappingIntervals(
                    f"{self.video_id}: {prev.word} [{prev.start_frame}, {prev.end_frame}] overlaps "
                    f"{iv.word} [{iv.start_frame}, {iv.end_frame}]"
                )
            prev = iv

    @property
    def words(self) -> list[str]:
        return [iv.word for iv in self.intervals if iv.word != SILENCE]


@dataclass(frozen=True)
class FrameLabels:
    phonemes: tuple[str, ...]
    visemes: tuple[int, ...]
    dropped: tuple[tuple[str, str], ...] = field(default=(), compare=False)

    def __len__(self):
        return len(self.phonemes)


def _to_frame(token: str, units_per_frame: Fraction) -> int:
    # round half up; time 0 (where corpus files start) lands on frame 1
    return max(1, math.floor(Fraction(token) / units_per_frame + Fraction(1, 2)))


def parse_transcript_lines(lines, video_id: str, units_per_frame=1, total_frames: int = DEFAULT_FRAMES) -> Transcript:
    upf = Fraction(str(units_per_frame))
    if upf <= 0:
        raise ValueError("units_per_frame must be positive")
    intervals = []
    for line_no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 3:
            raise MalformedLine(line_no, raw, "expected 'start end word'")
        try:
            start = _to_frame(tokens[0], upf)
            end = _to_frame(tokens[1], upf)
        except (ValueError, ZeroDivisionError):
            raise MalformedLine(line_no, raw, "non-numeric frame bounds") from None
        if start > end:
            raise MalformedLine(line_no, raw, "start after end")
        intervals.append(WordInterval(tokens[2].lower(), start, end))
    return Transcript(video_id, tuple(intervals), total_frames)


def parse_transcript(path, units_per_frame=1, total_frames: int = DEFAULT_FRAMES, video_id: str | None = None) -> Transcript:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"transcript not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return parse_transcript_lines(fh, video_id or path.stem, units_per_frame, total_frames)


def allocate_frames(n_frames: int, n_phonemes: int) -> list[int]:
    """Split ``n_frames`` among ``n_phonemes`` as evenly as possible, giving
    the remainder to the leading phonemes."""
    if n_frames < 1 or n_phonemes < 1:
        raise ValueError("n_frames and n_phonemes must be >= 1")
    if n_frames < n_phonemes:
        log.warning("%d frames for %d phonemes: dropping the last %d", n_frames, n_phonemes, n_phonemes - n_frames)
        return [1] * n_frames + [0] * (n_phonemes - n_frames)
    base, extra = divmod(n_frames, n_phonemes)
    return [base + 1] * extra + [base] * (n_phonemes - extra)


def label_frames(transcript: Transcript, pdict: PronunciationDict, vmap: VisemeMap) -> FrameLabels:
    silence_on = SILENCE in vmap.entries
    gap = SILENCE if silence_on else None
    phonemes: list[str | None] = [gap] * transcript.total_frames
    dropped = []
    for iv in transcript.intervals:
        if iv.word == SILENCE:
            continue
        try:
            pron = pdict.pronounce(iv.word)
        except UnknownWord:
            raise UnknownWord(iv.word, transcript.video_id) from None
        counts = allocate_frames(iv.n_frames, len(pron))
        t = iv.start_frame - 1
        for p, c in zip(pron, counts):
            if c == 0:
                dropped.append((iv.word, p))
            phonemes[t:t + c] = [p] * c
            t += c
    if dropped:
        log.warning("%s: dropped phonemes %s", transcript.video_id, dropped)
    visemes = tuple(vmap.entries[p] if p is not None else UNLABELLED for p in phonemes)
    return FrameLabels(tuple(p or "" for p in phonemes), visemes, tuple(dropped))
