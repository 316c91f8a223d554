"""Phoneme and viseme inventories, the phoneme-to-viseme map, and the
pronunciation dictionary.

Phoneme labels are lowercase ARPAbet without stress digits. Indices are
1-based everywhere they leave this module (files, classified sequences).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .errors import MalformedLine, MissingFile, UnknownPhoneme, UnknownWord

SILENCE = "sil"

# (viseme label, associated phonemes), row order gives the viseme number
VISEME_TABLE: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("P", ("b", "p", "m")),
    ("T", ("d", "t", "s", "z", "th", "dh")),
    ("K", ("g", "k", "n", "l", "y", "hh")),
    ("CH", ("jh", "ch")),
    ("F", ("f", "v")),
    ("W", ("r", "w")),
    ("IY", ("iy", "ih")),
    ("EH", ("eh", "ey", "ae")),
    ("AA", ("aa", "aw", "ay", "ah")),
    ("A0", ("ao", "oy", "ow")),
    ("UH", ("uh", "uw")),
)

SILENCE_VISEME_LABEL = "SIL"

_STRESS = re.compile(r"[012]$")


def strip_stress(label: str) -> str:
    return _STRESS.sub("", label).lower()


@dataclass(frozen=True)
class Inventory:
    """Ordered phoneme alphabet; indices are contiguous from 1."""

    labels: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("phoneme labels must be unique")
        object.__setattr__(self, "_index", {p: i for i, p in enumerate(self.labels, 1)})

    def __len__(self):
        return len(self.labels)

    def __contains__(self, label):
        return label in self._index

    def __iter__(self):
        return iter(self.labels)

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise UnknownPhoneme(label) from None

    def label(self, index: int) -> str:
        if not 1 <= index <= len(self.labels):
            raise IndexError(f"phoneme index {index} outside 1..{len(self.labels)}")
        return self.labels[index - 1]

    @property
    def speech(self) -> tuple[str, ...]:
        return tuple(p for p in self.labels if p != SILENCE)

    @property
    def has_silence(self) -> bool:
        return SILENCE in self._index


def default_inventory(silence: bool = True) -> Inventory:
    labels = tuple(p for _, row in VISEME_TABLE for p in row)
    if silence:
        labels += (SILENCE,)
    return Inventory(labels)


@dataclass(frozen=True)
class VisemeMap:
    """Many-to-one phoneme -> viseme index map, plus viseme labels."""

    entries: Mapping[str, int]
    viseme_labels: Mapping[int, str]

    def __getitem__(self, phoneme: str) -> int:
        return self.entries[phoneme]

    def __contains__(self, phoneme):
        return phoneme in self.entries

    @property
    def n_visemes(self) -> int:
        return len(self.viseme_labels)

    @property
    def silence_viseme(self) -> int | None:
        return self.entries.get(SILENCE)

    def preimage(self, viseme: int) -> list[str]:
        return [p for p, v in self.entries.items() if v == viseme]

    def preimage_sizes(self, speech_only: bool = True) -> list[int]:
        visemes = sorted(self.viseme_labels)
        if speech_only and self.silence_viseme is not None:
            visemes = [v for v in visemes if v != self.silence_viseme]
        return [len(self.preimage(v)) for v in visemes]

    def replace(self, **changes: int | None) -> "VisemeMap":
        """Copy with some entries reassigned; a value of None removes the entry."""
        entries = dict(self.entries)
        for p, v in changes.items():
            if v is None:
                entries.pop(p, None)
            else:
                entries[p] = v
        return VisemeMap(entries, dict(self.viseme_labels))


def default_viseme_map(silence: bool = True) -> VisemeMap:
    entries = {}
    labels = {}
    for v, (vlabel, phonemes) in enumerate(VISEME_TABLE, 1):
        labels[v] = vlabel
        for p in phonemes:
            entries[p] = v
    if silence:
        sv = len(VISEME_TABLE) + 1
        entries[SILENCE] = sv
        labels[sv] = SILENCE_VISEME_LABEL
    return VisemeMap(entries, labels)


def viseme_of(vmap: VisemeMap, phoneme: str) -> int:
    return vmap.entries[phoneme]


def validate_map(vmap: VisemeMap) -> list[str]:
    """Compare a map against the bundled table; returns violations, empty if clean."""
    violations = []
    expected = default_viseme_map(silence=False)
    n_speech = len(VISEME_TABLE)
    for v in range(1, n_speech + 1):
        got = vmap.viseme_labels.get(v)
        if got != expected.viseme_labels[v]:
            violations.append(f"viseme {v} labelled {got!r}, expected {expected.viseme_labels[v]!r}")
    for p, v in expected.entries.items():
        if p not in vmap.entries:
            violations.append(f"phoneme {p!r} missing")
        elif vmap.entries[p] != v:
            violations.append(f"phoneme {p!r} maps to viseme {vmap.entries[p]}, expected {v}")
    for p, v in vmap.entries.items():
        if p == SILENCE:
            if v <= n_speech:
                violations.append(f"silence maps to speech viseme {v}")
                continue
            others = [q for q in vmap.entries if q != SILENCE and vmap.entries[q] == v]
            if others:
                violations.append(f"silence viseme {v} shared with {others}")
        elif p not in expected.entries:
            violations.append(f"unexpected phoneme {p!r}")
    extra = sorted(v for v, label in vmap.viseme_labels.items()
                   if v > n_speech and v != vmap.silence_viseme and label != SILENCE_VISEME_LABEL)
    if extra:
        violations.append(f"unexpected visemes {extra}")
    return violations


@dataclass
class PronunciationDict:
    entries: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __contains__(self, word):
        return word.lower() in self.entries

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def pronounce(self, word: str) -> tuple[str, ...]:
        try:
            return self.entries[word.lower()]
        except KeyError:
            raise UnknownWord(word) from None


def pronounce(pdict: PronunciationDict, word: str) -> tuple[str, ...]:
    return pdict.pronounce(word)


def _content_lines(lines: Iterable[str]):
    for line_no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line_no, raw.rstrip("\n"), line.split()


def parse_lexicon(lines: Iterable[str], inventory: Inventory | None = None) -> PronunciationDict:
    inventory = inventory or default_inventory()
    entries = {}
    for line_no, raw, tokens in _content_lines(lines):
        if len(tokens) < 2:
            raise MalformedLine(line_no, raw, "expected a word followed by phonemes")
        word = tokens[0].lower()
        phones = tuple(strip_stress(t) for t in tokens[1:])
        for p in phones:
            if p not in inventory or p == SILENCE:
                raise UnknownPhoneme(p, line_no)
        # first pronunciation wins, as with CMU-style alternates
        entries.setdefault(word, phones)
    return PronunciationDict(entries)


def load_lexicon(path, inventory: Inventory | None = None) -> PronunciationDict:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"lexicon file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return parse_lexicon(fh, inventory)


def bundled_lexicon() -> PronunciationDict:
    text = resources.files("lipread.data").joinpath("grid_lexicon.txt").read_text(encoding="utf-8")
    return parse_lexicon(text.splitlines())


def load_viseme_map(path, silence: bool = True) -> VisemeMap:
    """Read a map file whose lines are ``VISEME_LABEL ph1 ph2 ...``; line order
    gives the viseme number."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"viseme map file not found: {path}")
    entries, labels = {}, {}
    with open(path, encoding="utf-8") as fh:
        for v, (line_no, raw, tokens) in enumerate(_content_lines(fh), 1):
            if len(tokens) < 2:
                raise MalformedLine(line_no, raw, "expected a viseme label followed by phonemes")
            labels[v] = tokens[0]
            for p in tokens[1:]:
                entries[strip_stress(p)] = v
    if silence:
        sv = len(labels) + 1
        entries[SILENCE] = sv
        labels[sv] = SILENCE_VISEME_LABEL
    return VisemeMap(entries, labels)
