"""Command-line driver for the batch stages.

Exit codes: 0 success, 1 completed with per-item failures (for example
unreadable frames during ``extract``), 2 usage error, 3 fatal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline as pl
from .alignment import parse_transcript
from .classify import FrameClassifier
from .config import MODES, VISEME, PipelineConfig
from .errors import LipreadError, MissingTranscript
from .lexicon import bundled_lexicon, default_viseme_map, load_lexicon, load_viseme_map

log = logging.getLogger("lipread")

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2
EXIT_FATAL = 3


def _lexicon(args):
    return load_lexicon(args.lexicon) if getattr(args, "lexicon", None) else bundled_lexicon()


def _viseme_map(args, cfg):
    if getattr(args, "viseme_map", None):
        return load_viseme_map(args.viseme_map, cfg.silence)
    return default_viseme_map(cfg.silence)


def _alphabet(args, cfg) -> int:
    if getattr(args, "alphabet_size", None):
        return args.alphabet_size
    if cfg.alphabet_size:
        return cfg.alphabet_size
    return pl.alphabet_size(args.mode, cfg.silence)


def _manifest(args, cfg):
    m = pl.DatasetManifest.load(args.manifest)
    if args.units_per_frame is not None:
        m.units_per_frame = args.units_per_frame
    elif cfg.units_per_frame != 1 and m.units_per_frame == 1:
        m.units_per_frame = cfg.units_per_frame
    return m


def cmd_extract(args, cfg):
    table, failures = pl.extract_features(_manifest(args, cfg), cfg, args.seed)
    table.write(args.out)
    log.info("wrote %d feature rows to %s", len(table.ids), args.out)
    if failures:
        log.warning("%d frames failed", failures)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_align(args, cfg):
    labels = pl.align(_manifest(args, cfg), _lexicon(args), _viseme_map(args, cfg))
    labels.write(args.out)
    return EXIT_OK


def cmd_train_classifier(args, cfg):
    features = pl.FeatureTable.read(args.features)
    labels = pl.LabelTable.read(args.labels)
    model, acc = pl.train_frame_classifier(features, labels, args.mode, cfg, args.seed)
    model.save(args.out)
    print(f"held-out frame accuracy: {pl.format_percent(acc) if acc == acc else 'n/a'} %")
    return EXIT_OK


def cmd_classify(args, cfg):
    features = pl.FeatureTable.read(args.features)
    model = FrameClassifier.load(args.model)
    if model.mode != args.mode:
        log.warning("model was trained in %s mode, running in %s mode", model.mode, args.mode)
    frames = args.frames_per_video
    if frames is None:
        frames = _manifest(args, cfg).frames_per_video if args.manifest else pl.DEFAULT_FRAMES
    pl.write_sequences(args.out, pl.classify_videos(features, model, frames))
    return EXIT_OK


def _transcripts_from_dir(directory, seqs, units_per_frame):
    out = {}
    for s in seqs:
        path = Path(directory) / f"{s.video_id}.align"
        if not path.is_file():
            raise MissingTranscript(s.video_id)
        out[s.video_id] = parse_transcript(path, units_per_frame, len(s.symbols), s.video_id)
    return out


def cmd_binsort(args, cfg):
    seqs = pl.read_sequences(args.sequences)
    if args.manifest:
        transcripts = _manifest(args, cfg).transcripts()
    else:
        upf = args.units_per_frame if args.units_per_frame is not None else cfg.units_per_frame
        transcripts = _transcripts_from_dir(args.transcripts, seqs, upf)
    pl.write_word_sequences(args.out, pl.bin_sort(seqs, transcripts))
    return EXIT_OK


def cmd_train_hmm(args, cfg):
    data = pl.read_word_sequences(args.words)
    bank = pl.train_word_models(data, _alphabet(args, cfg), cfg, args.seed, _lexicon(args))
    bank.save(args.out)
    return EXIT_OK


def cmd_evaluate(args, cfg):
    data = pl.read_word_sequences(args.words)
    subsets = cfg.subsets or pl.default_subsets(data)
    report = pl.evaluate(data, subsets, _alphabet(args, cfg), cfg, args.seed, _lexicon(args))
    report.write(args.out)
    return EXIT_OK


def cmd_synth(args, cfg):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.video:
        pl.synth_video_corpus(out, args.n_videos, args.words_per_video, args.seed,
                              vocabulary=cfg.synth_words or None)
        return EXIT_OK
    spec = pl.SynthSpec.random(cfg.synth_words, cfg.synth_states, cfg.synth_alphabet, cfg.synth_instances,
                               cfg.epsilon, args.seed, cfg.synth_concentration, cfg.synth_min_length,
                               cfg.synth_max_length)
    data = pl.synth_generate(spec)
    seqs, transcripts = pl.pack_videos(data, spec.alphabet_size, args.seed)
    pl.write_sequences(out / "sequences.csv", seqs)
    tdir = out / "transcripts"
    tdir.mkdir(exist_ok=True)
    for vid in sorted(transcripts):
        pl.write_transcript(tdir / f"{vid}.align", transcripts[vid])
    generators = {w: spec.generators[w].to_dict() for w in spec.words}
    (out / "generators.json").write_text(json.dumps({"alphabet_size": spec.alphabet_size,
                                                     "generators": generators}, sort_keys=True) + "\n",
                                         encoding="utf-8")
    return EXIT_OK


def cmd_report(args, cfg):
    text = pl.report_render(pl.EvalReport.read(args.report), args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lipread", description="Lip-reading pipeline from frames to word accuracy.")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--mode", choices=MODES, default=VISEME)
    p.add_argument("--units-per-frame", type=float, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("extract", help="per-frame lip features from a manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("align", help="per-frame phoneme and viseme labels")
    s.add_argument("--manifest", required=True)
    s.add_argument("--lexicon")
    s.add_argument("--viseme-map")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_align)

    s = sub.add_parser("train-classifier", help="SVD plus kNN/NB frame classifier")
    s.add_argument("--features", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train_classifier)

    s = sub.add_parser("classify", help="classify every frame into symbol sequences")
    s.add_argument("--features", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--manifest")
    s.add_argument("--frames-per-video", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("binsort", help="cut sequences into per-word subsequences")
    s.add_argument("--sequences", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--manifest")
    g.add_argument("--transcripts", help="directory of <video_id>.align files")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_binsort)

    for name, func, help_ in (("train-hmm", cmd_train_hmm, "train one HMM per word"),
                              ("evaluate", cmd_evaluate, "split, train and decode per word subset")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--words", required=True)
        s.add_argument("--alphabet-size", type=int)
        s.add_argument("--lexicon")
        s.add_argument("--out", required=True)
        s.set_defaults(func=func)

    s = sub.add_parser("synth", help="synthetic symbol corpus (or frames with --video)")
    s.add_argument("--out", required=True)
    s.add_argument("--video", action="store_true")
    s.add_argument("--n-videos", type=int, default=4)
    s.add_argument("--words-per-video", type=int, default=4)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("report", help="render an evaluation report")
    s.add_argument("--report", required=True)
    s.add_argument("--format", choices=("text", "csv"), default="text")
    s.add_argument("--out")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = PipelineConfig.load(args.config)
        return args.func(args, cfg)
    except (LipreadError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
