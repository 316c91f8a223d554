"""Batch stages: manifests, feature extraction, frame classification,
bin-sorting, word-model evaluation, synthetic corpora and reports.

Every stage is deterministic given its inputs and seed. Tabular artifacts
are CSV with a header row.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from . import classify as clf
from . import hmm
from .alignment import DEFAULT_FRAMES, UNLABELLED, Transcript, label_frames, parse_transcript
from .config import PHONEME, VISEME, PipelineConfig
from .errors import (
    DimensionMismatch,
    LipreadError,
    ManifestError,
    MissingFile,
    MissingFrames,
    MissingTranscript,
    RankTooLarge,
    TooFewSequences,
)
from .lexicon import SILENCE, PronunciationDict, VisemeMap, default_inventory, default_viseme_map
from .lipextract import crop, frame_feature, read_frame, write_frame

log = logging.getLogger(__name__)

DEFAULT_PATTERN = "{video_id}_{frame:03d}.ppm"
MIN_EVAL_SEQUENCES = 4


# -- manifests ---------------------------------------------------------------

@dataclass
class VideoEntry:
    video_id: str
    frame_pattern: str
    transcript: Path
    roi: tuple[int, int, int, int]

    def frame_path(self, root: Path, frame: int) -> Path:
        return root / self.frame_pattern.format(video_id=self.video_id, frame=frame)


@dataclass
class DatasetManifest:
    root: Path
    videos: list[VideoEntry]
    frames_per_video: int = DEFAULT_FRAMES
    units_per_frame: float = 1

    def __post_init__(self):
        ids = [v.video_id for v in self.videos]
        dup = sorted({i for i in ids if ids.count(i) > 1})
        if dup:
            raise ManifestError(f"duplicate video ids: {dup}")

    @classmethod
    def from_dict(cls, d: Mapping, base: Path = Path(".")) -> "DatasetManifest":
        try:
            root = base / d.get("root", ".")
            default_roi = d.get("roi")
            default_pattern = d.get("frame_pattern", DEFAULT_PATTERN)
            videos = []
            for v in d["videos"]:
                roi = v.get("roi", default_roi)
                if roi is None or len(roi) != 4:
                    raise ManifestError(f"video {v['video_id']!r} has no valid ROI")
                videos.append(VideoEntry(str(v["video_id"]), v.get("frame_pattern", default_pattern),
                                         root / v.get("transcript", f"{v['video_id']}.align"),
                                         tuple(int(x) for x in roi)))
        except (KeyError, TypeError) as exc:
            raise ManifestError(f"malformed manifest: {exc}") from exc
        return cls(root, videos, int(d.get("frames_per_video", DEFAULT_FRAMES)), d.get("units_per_frame", 1))

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = Path(path)
        if not path.is_file():
            raise MissingFile(f"manifest not found: {path}")
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: {exc}") from exc
        return cls.from_dict(d, path.parent)

    def to_dict(self, base: Path | None = None) -> dict:
        root = self.root if base is None else Path(self.root).relative_to(base)
        return {
            "root": str(root),
            "frames_per_video": self.frames_per_video,
            "units_per_frame": self.units_per_frame,
            "videos": [
                {"video_id": v.video_id, "frame_pattern": v.frame_pattern,
                 "transcript": str(Path(v.transcript).relative_to(self.root)), "roi": list(v.roi)}
                for v in self.videos
            ],
        }

    def transcripts(self) -> dict[str, Transcript]:
        return {v.video_id: parse_transcript(v.transcript, self.units_per_frame, self.frames_per_video,
                                             video_id=v.video_id)
                for v in self.videos}


# -- CSV helpers -------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(path_or_buf, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    own = not hasattr(path_or_buf, "write")
    fh = open(path_or_buf, "w", newline="", encoding="utf-8") if own else path_or_buf
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if own:
            fh.close()


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None:
            raise ValueError(f"{path}: empty CSV")
        return header, [row for row in r if row]


# -- features ----------------------------------------------------------------

@dataclass
class FeatureTable:
    """Per-frame feature rows keyed by (video_id, frame)."""

    ids: list[tuple[str, int]]
    values: np.ndarray  # N x D

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def write(self, path) -> None:
        header = ["video_id", "frame"] + [f"f{i}" for i in range(self.dim)]
        write_csv(path, header, ([vid, fr] + [_fmt(x) for x in row] for (vid, fr), row in zip(self.ids, self.values)))

    @classmethod
    def read(cls, path) -> "FeatureTable":
        header, rows = read_csv(path)
        if header[:2] != ["video_id", "frame"]:
            raise ValueError(f"{path}: expected video_id,frame columns")
        ids = [(r[0], int(r[1])) for r in rows]
        values = np.array([[float(x) for x in r[2:]] for r in rows], dtype=np.float64).reshape(len(rows), len(header) - 2)
        return cls(ids, values)


def extract_features(manifest: DatasetManifest, cfg: PipelineConfig, seed: int = 0) -> tuple[FeatureTable, int]:
    """Feature row per readable frame. Unreadable frames are logged and
    skipped; the count of such failures is returned alongside the table."""
    ids, rows, failures = [], [], 0
    for video in sorted(manifest.videos, key=lambda v: v.video_id):
        for frame in range(1, manifest.frames_per_video + 1):
            path = video.frame_path(manifest.root, frame)
            try:
                pixels = read_frame(path)
            except (MissingFile, OSError) as exc:
                log.warning("%s frame %d: %s", video.video_id, frame, exc)
                failures += 1
                continue
            try:
                roi = crop(pixels, video.roi)
            except ValueError as exc:
                raise ManifestError(f"{video.video_id}: {exc}") from exc
            try:
                feat = frame_feature(roi, cfg.feature_mode, cfg.kmeans_k, seed, cfg.grid_w, cfg.grid_h)
            except (ValueError, LipreadError) as exc:
                log.warning("%s frame %d: %s", video.video_id, frame, exc)
                failures += 1
                continue
            ids.append((video.video_id, frame))
            rows.append(feat)
    dim = len(rows[0]) if rows else 0
    return FeatureTable(ids, np.array(rows, dtype=np.float64).reshape(len(rows), dim)), failures


# -- labels ------------------------------------------------------------------

@dataclass
class LabelTable:
    ids: list[tuple[str, int]]
    phonemes: list[str]
    phoneme_idx: list[int]
    visemes: list[int]

    def labels(self, mode: str) -> list[int]:
        return self.visemes if mode == VISEME else self.phoneme_idx

    def write(self, path) -> None:
        write_csv(path, ["video_id", "frame", "phoneme", "phoneme_index", "viseme"],
                  ([vid, fr, p, pi, v] for (vid, fr), p, pi, v in
                   zip(self.ids, self.phonemes, self.phoneme_idx, self.visemes)))

    @classmethod
    def read(cls, path) -> "LabelTable":
        _, rows = read_csv(path)
        return cls([(r[0], int(r[1])) for r in rows], [r[2] for r in rows],
                   [int(r[3]) for r in rows], [int(r[4]) for r in rows])


def align(manifest: DatasetManifest, pdict: PronunciationDict, vmap: VisemeMap) -> LabelTable:
    inv = default_inventory(silence=SILENCE in vmap.entries)
    out = LabelTable([], [], [], [])
    transcripts = manifest.transcripts()
    for vid in sorted(transcripts):
        fl = label_frames(transcripts[vid], pdict, vmap)
        for t, (p, v) in enumerate(zip(fl.phonemes, fl.visemes), 1):
            out.ids.append((vid, t))
            out.phonemes.append(p or "-")
            out.phoneme_idx.append(inv.index(p) if p else UNLABELLED)
            out.visemes.append(v)
    return out


def alphabet_size(mode: str, silence: bool = True) -> int:
    if mode == PHONEME:
        return len(default_inventory(silence))
    return default_viseme_map(silence).n_visemes


# -- frame classifier --------------------------------------------------------

def train_frame_classifier(features: FeatureTable, labels: LabelTable, mode: str, cfg: PipelineConfig,
                           seed: int = 0) -> tuple[clf.FrameClassifier, float]:
    """Fit SVD on all labelled frames, train on a random split of the
    coordinates and report held-out accuracy."""
    lab = dict(zip(labels.ids, labels.labels(mode)))
    keep = [i for i, key in enumerate(features.ids) if lab.get(key, UNLABELLED) != UNLABELLED]
    if not keep:
        raise ValueError("no labelled frames match the feature table")
    X = features.values[keep].T
    y = np.array([lab[features.ids[i]] for i in keep], dtype=np.int64)
    r = min(cfg.svd_rank, *X.shape)
    try:
        proj, V = clf.fit_svd(X, r, cfg.center)
    except RankTooLarge:
        r = clf.numerical_rank(X, cfg.center)
        log.warning("feature matrix has rank %d < %d; using rank %d", r, cfg.svd_rank, r)
        proj, V = clf.fit_svd(X, r, cfg.center)
    train, test = clf.split(len(y), cfg.split_fraction, seed)
    if cfg.classifier == "nb":
        model = clf.nb_train(V[train], y[train])
    else:
        model = clf.KnnModel(V[train], y[train], min(cfg.knn_k, len(train)))
    acc = clf.evaluate_classifier(model.predict, V, y, (train, test))
    return clf.FrameClassifier(proj, model, mode), acc


class ClassifiedSequence(NamedTuple):
    video_id: str
    symbols: tuple[int, ...]


def classify_videos(features: FeatureTable, classifier: clf.FrameClassifier,
                    frames_per_video: int = DEFAULT_FRAMES) -> list[ClassifiedSequence]:
    if features.dim != classifier.projection.dim:
        raise DimensionMismatch(f"features have dimension {features.dim}, model expects {classifier.projection.dim}")
    by_video = defaultdict(list)
    for i, (vid, frame) in enumerate(features.ids):
        by_video[vid].append((frame, i))
    out = []
    for vid in sorted(by_video):
        frames = sorted(by_video[vid])
        if len(frames) < frames_per_video:
            raise MissingFrames(vid, len(frames), frames_per_video)
        idx = [i for _, i in frames]
        pred = classifier.predict_columns(features.values[idx].T)
        out.append(ClassifiedSequence(vid, tuple(int(p) for p in pred)))
    return out


def write_sequences(path, seqs: Sequence[ClassifiedSequence]) -> None:
    write_csv(path, ["video_id", "symbols"], ([s.video_id, " ".join(map(str, s.symbols))] for s in seqs))


def read_sequences(path) -> list[ClassifiedSequence]:
    _, rows = read_csv(path)
    return [ClassifiedSequence(r[0], tuple(int(x) for x in r[1].split())) for r in rows]


# -- bin sorting -------------------------------------------------------------

class WordSequence(NamedTuple):
    seq_id: str
    symbols: tuple[int, ...]


WordSequences = dict  # word -> list[WordSequence]


def bin_sort(sequences: Sequence[ClassifiedSequence], transcripts: Mapping[str, Transcript]) -> WordSequences:
    """Cut each classified video into per-word subsequences using the
    transcript frame intervals."""
    out = defaultdict(list)
    for seq in sequences:
        if seq.video_id not in transcripts:
            raise MissingTranscript(seq.video_id)
        for iv in transcripts[seq.video_id].intervals:
            if iv.word == SILENCE:
                continue
            sym = seq.symbols[iv.start_frame - 1:iv.end_frame]
            out[iv.word].append(WordSequence(f"{seq.video_id}:{iv.start_frame}", tuple(sym)))
    return {w: out[w] for w in sorted(out)}


def write_word_sequences(path, data: WordSequences) -> None:
    write_csv(path, ["word", "seq_id", "symbols"],
              ([w, s.seq_id, " ".join(map(str, s.symbols))] for w in sorted(data) for s in data[w]))


def read_word_sequences(path) -> WordSequences:
    _, rows = read_csv(path)
    out = defaultdict(list)
    for w, sid, sym in rows:
        out[w].append(WordSequence(sid, tuple(int(x) for x in sym.split())))
    return dict(out)


# -- word models -------------------------------------------------------------

def q_rule(cfg: PipelineConfig, pdict: PronunciationDict | None = None) -> Callable[[str], int]:
    base = hmm.phoneme_state_rule(pdict)
    overrides = dict(cfg.q_overrides)
    return lambda w: int(overrides[w]) if w in overrides else base(w)


def train_word_models(data: WordSequences, M: int, cfg: PipelineConfig, seed: int = 0,
                      pdict: PronunciationDict | None = None) -> hmm.WordModelBank:
    return hmm.train_bank({w: [s.symbols for s in seqs] for w, seqs in data.items()}, M,
                          q_rule(cfg, pdict), cfg.train_config(seed))


@dataclass
class EvalRow:
    target: str
    words: tuple[str, ...]
    test_count: int
    correct_count: int

    @property
    def accuracy(self) -> Fraction:
        return Fraction(self.correct_count, self.test_count) if self.test_count else Fraction(0)


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)

    def write(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(report_render(self, "csv"))

    @classmethod
    def read(cls, path) -> "EvalReport":
        _, rows = read_csv(path)
        return cls([EvalRow(r[0], tuple(r[1].split()), int(r[2]), int(r[3])) for r in rows])


def evaluate(data: WordSequences, subsets, M: int, cfg: PipelineConfig, seed: int = 0,
             pdict: PronunciationDict | None = None,
             hook: Callable[[str, list[str]], None] | None = None) -> EvalReport:
    """Per-word train/test split, one model per word trained on its training
    part, and each target's test sequences decoded against the models of its
    candidate set.

    ``hook(word, seq_ids)`` is called with the ids of the sequences that go
    into each word's training run.
    """
    words = sorted({w for s in subsets for w in s.words})
    for w in words:
        n = len(data.get(w, ()))
        if n < MIN_EVAL_SEQUENCES:
            raise TooFewSequences(w, n, MIN_EVAL_SEQUENCES)
    splits = {w: clf.split(len(data[w]), cfg.split_fraction, hmm.word_seed(seed, w)) for w in words}
    train_data = {}
    for w in words:
        train_idx = splits[w][0]
        if hook is not None:
            hook(w, [data[w][i].seq_id for i in train_idx])
        train_data[w] = [data[w][i].symbols for i in train_idx]
    bank = hmm.train_bank(train_data, M, q_rule(cfg, pdict), cfg.train_config(seed))
    report = EvalReport()
    for s in subsets:
        sub = bank.subset(s.words)
        test_idx = splits[s.target][1]
        correct = sum(hmm.decode_word(sub, data[s.target][i].symbols)[0] == s.target for i in test_idx)
        report.rows.append(EvalRow(s.target, s.words, len(test_idx), int(correct)))
    return report


def default_subsets(words: Sequence[str]):
    from .config import Subset

    words = tuple(sorted(words))
    return [Subset(w, words) for w in words]


# -- reports -----------------------------------------------------------------

def format_percent(acc: Fraction) -> str:
    """Percentage with one decimal, rounded half up."""
    tenths = math.floor(Fraction(acc) * 1000 + Fraction(1, 2))
    return f"{tenths // 10}.{tenths % 10}"


def report_render(report: EvalReport, fmt: str = "text") -> str:
    if fmt == "text":
        lines = ["Word | Set | Accuracy"]
        lines += [f"{r.target} | {', '.join(r.words)} | {format_percent(r.accuracy)} %" for r in report.rows]
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        write_csv(buf, ["word", "set", "test_count", "correct_count", "accuracy"],
                  ([r.target, " ".join(r.words), r.test_count, r.correct_count, format_percent(r.accuracy)]
                   for r in report.rows))
        return buf.getvalue()
    raise ValueError(f"unknown report format {fmt!r}")


# -- synthetic data ----------------------------------------------------------

@dataclass
class SynthSpec:
    words: list[str]
    generators: dict[str, hmm.Hmm]
    instances: int = 40
    epsilon: float = 0.1
    seed: int = 0
    min_length: int = 15
    max_length: int = 25

    def __post_init__(self):
        if not 0 <= self.epsilon < 1:
            raise ValueError("epsilon must lie in [0, 1)")
        if self.instances < MIN_EVAL_SEQUENCES:
            raise ValueError(f"instances must be >= {MIN_EVAL_SEQUENCES}")
        if not 1 <= self.min_length <= self.max_length:
            raise ValueError("need 1 <= min_length <= max_length")
        missing = [w for w in self.words if w not in self.generators]
        if missing:
            raise ValueError(f"no generator for {missing}")
        sizes = {g.alphabet_size for g in self.generators.values()}
        if len(sizes) != 1:
            raise ValueError("generators must share one alphabet")

    @property
    def alphabet_size(self) -> int:
        return next(iter(self.generators.values())).alphabet_size

    @classmethod
    def random(cls, words, Q=3, M=11, instances=40, epsilon=0.1, seed=0, concentration=0.2,
               min_length=15, max_length=25) -> "SynthSpec":
        gens = {w: hmm.random_hmm(Q, M, [seed, hmm.word_seed(seed, w), 1], concentration) for w in words}
        return cls(list(words), gens, instances, epsilon, seed, min_length, max_length)


def corrupt(symbols, epsilon: float, M: int, rng) -> tuple[int, ...]:
    """Replace each symbol, with probability epsilon, by a uniform draw from 1..M."""
    symbols = np.asarray(symbols, dtype=np.int64)
    hit = rng.random(symbols.size) < epsilon
    noise = rng.integers(1, M + 1, size=symbols.size)
    return tuple(int(x) for x in np.where(hit, noise, symbols))


def synth_generate(spec: SynthSpec) -> WordSequences:
    out = {}
    M = spec.alphabet_size
    for w in spec.words:
        rng = np.random.default_rng([spec.seed, hmm.word_seed(spec.seed, w), 2])
        seqs = []
        for i in range(spec.instances):
            T = int(rng.integers(spec.min_length, spec.max_length + 1))
            clean = hmm.sample(spec.generators[w], T, int(rng.integers(2 ** 32)))
            seqs.append(WordSequence(f"{w}:{i}", corrupt(clean, spec.epsilon, M, rng)))
        out[w] = seqs
    return out


def pack_videos(data: WordSequences, M: int, seed: int = 0, max_gap: int = 3
                ) -> tuple[list[ClassifiedSequence], dict[str, Transcript]]:
    """Lay per-word sequences end to end as symbol "videos".

    Video ``i`` holds instance ``i`` of every word that has one, in a seeded
    random order, each preceded by 1..max_gap uniform noise symbols. The
    returned transcripts cut the words back out exactly.
    """
    from .alignment import WordInterval

    rng = np.random.default_rng([seed, 3])
    words = sorted(data)
    n = max((len(data[w]) for w in words), default=0)
    seqs, transcripts = [], {}
    for i in range(n):
        vid = f"v{i:04d}"
        present = [w for w in words if i < len(data[w])]
        symbols, intervals = [], []
        for j in rng.permutation(len(present)):
            w = present[j]
            symbols += [int(x) for x in rng.integers(1, M + 1, size=int(rng.integers(1, max_gap + 1)))]
            start = len(symbols) + 1
            symbols += data[w][i].symbols
            intervals.append(WordInterval(w, start, len(symbols)))
        seqs.append(ClassifiedSequence(vid, tuple(symbols)))
        transcripts[vid] = Transcript(vid, tuple(intervals), len(symbols))
    return seqs, transcripts


def write_transcript(path, transcript: Transcript) -> None:
    Path(path).write_text("".join(f"{iv.start_frame} {iv.end_frame} {iv.word}\n" for iv in transcript.intervals),
                          encoding="utf-8")


# -- synthetic video corpus --------------------------------------------------

SKIN = (214, 160, 140)
LIP = (176, 52, 72)
MOUTH = (62, 24, 30)

# per viseme: outer half-width, outer half-height, inner half-width, inner half-height
LIP_SHAPES = {
    1: (15, 6, 0, 0), 2: (15, 7, 10, 2), 3: (14, 8, 9, 3), 4: (11, 9, 6, 4),
    5: (15, 6, 12, 1), 6: (9, 8, 4, 3), 7: (17, 6, 13, 2), 8: (15, 9, 10, 5),
    9: (14, 11, 9, 7), 10: (11, 11, 6, 7), 11: (8, 8, 3, 4), 12: (14, 5, 0, 0),
}


def draw_mouth(viseme: int, size=(48, 64), rng=None, noise: float = 2.0) -> np.ndarray:
    H, W = size
    ow, oh, iw, ih = LIP_SHAPES.get(viseme, LIP_SHAPES[12])
    yy, xx = np.mgrid[:H, :W]
    cx, cy = W / 2, H / 2
    img = np.empty((H, W, 3))
    img[:] = SKIN
    img[((xx - cx) / ow) ** 2 + ((yy - cy) / oh) ** 2 <= 1] = LIP
    if iw and ih:
        img[((xx - cx) / iw) ** 2 + ((yy - cy) / ih) ** 2 <= 1] = MOUTH
    if rng is not None and noise > 0:
        img += rng.normal(0, noise, img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def synth_video_corpus(out_dir, n_videos: int = 4, words_per_video: int = 4, seed: int = 0,
                       frames_per_video: int = DEFAULT_FRAMES, vocabulary: Sequence[str] | None = None,
                       pdict: PronunciationDict | None = None) -> Path:
    """Write frames, transcripts and a manifest for a small synthetic corpus.

    Each video speaks ``words_per_video`` words separated by short silences;
    each frame shows a mouth drawn for the viseme of its aligned label.
    """
    from .lexicon import bundled_lexicon

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pdict = pdict or bundled_lexicon()
    vmap = default_viseme_map()
    vocab = list(vocabulary or ["bin", "blue", "green", "red", "white", "now", "soon", "please"])
    rng = np.random.default_rng(seed)
    H, W = 48, 64
    videos = []
    for n in range(n_videos):
        vid = f"s{n:03d}"
        words = [vocab[i] for i in rng.integers(len(vocab), size=words_per_video)]
        # equal slots with a silent gap before each word
        slot = frames_per_video // words_per_video
        lines, intervals = [], []
        for k, w in enumerate(words):
            start = k * slot + 1 + int(rng.integers(1, 3))
            end = min((k + 1) * slot - int(rng.integers(0, 2)), frames_per_video)
            lines.append(f"{start} {end} {w}")
        (out_dir / f"{vid}.align").write_text("\n".join(lines) + "\n", encoding="utf-8")
        tr = parse_transcript(out_dir / f"{vid}.align", 1, frames_per_video, vid)
        labels = label_frames(tr, pdict, vmap)
        for t, v in enumerate(labels.visemes, 1):
            frame = np.empty((H + 16, W + 16, 3), dtype=np.uint8)
            frame[:] = SKIN
            frame[8:8 + H, 8:8 + W] = draw_mouth(v, (H, W), rng)
            write_frame(out_dir / DEFAULT_PATTERN.format(video_id=vid, frame=t), frame)
        videos.append({"video_id": vid, "transcript": f"{vid}.align", "roi": [8, 8, W, H]})
    manifest = {"root": ".", "frames_per_video": frames_per_video, "units_per_frame": 1,
                "frame_pattern": DEFAULT_PATTERN, "videos": videos}
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    return path
