"""Run configuration, read from a JSON document."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .hmm import TrainConfig

PHONEME = "phoneme"
VISEME = "viseme"
MODES = (PHONEME, VISEME)

GRID_COLOURS = ["bin", "blue", "green", "red", "white"]


@dataclass
class Subset:
    target: str
    words: tuple[str, ...]

    def __post_init__(self):
        self.words = tuple(self.words)
        if self.target not in self.words:
            raise ValueError(f"candidate set {self.words} must contain target {self.target!r}")


@dataclass
class PipelineConfig:
    # lip features
    feature_mode: str = "mask_grid"
    grid_w: int = 32
    grid_h: int = 16
    kmeans_k: int = 3
    # frame classifier
    classifier: str = "knn"
    knn_k: int = 1
    svd_rank: int = 30
    center: bool = False
    split_fraction: float = 0.75
    # labels
    silence: bool = True
    units_per_frame: float = 1
    # word models
    q_overrides: dict = field(default_factory=dict)
    alphabet_size: int | None = None
    max_iters: int = 100
    ll_tol: float = 1e-6
    restarts: int = 5
    length_mode: str = "native"
    uniform_initial: bool = False
    smoothing: float = 1e-10
    subsets: list = field(default_factory=list)
    # synthetic corpus
    synth_words: list = field(default_factory=lambda: list(GRID_COLOURS))
    synth_instances: int = 40
    synth_states: int = 3
    synth_alphabet: int = 11
    synth_min_length: int = 15
    synth_max_length: int = 25
    synth_concentration: float = 0.2
    epsilon: float = 0.1

    def __post_init__(self):
        self.subsets = [s if isinstance(s, Subset) else Subset(s["target"], s["set"]) for s in self.subsets]
        if self.classifier not in ("knn", "nb"):
            raise ValueError(f"unknown classifier {self.classifier!r}")

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(self.max_iters, self.ll_tol, seed, self.restarts, self.length_mode,
                           self.uniform_initial, self.smoothing)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        if path is None:
            return cls()
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
