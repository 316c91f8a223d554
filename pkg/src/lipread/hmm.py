"""Discrete-observation hidden Markov models.

Observation symbols are 1-based integers ``1..M`` at the API surface. In
``pad_stop`` mode a model carries one extra emission column for the stop
symbol ``M + 1`` and a fixed ``pad_length``: sequences are right-padded with
the stop symbol (or cut) to that length before scoring.
"""

from __future__ import annotations

import json
import logging
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .errors import AlphabetMismatch, EmptyData, SymbolOutOfRange, TooFewSequences

log = logging.getLogger(__name__)

NATIVE = "native"
PAD_STOP = "pad_stop"
LENGTH_MODES = (NATIVE, PAD_STOP)

_ROW_TOL = 1e-10


def _check_stochastic(name, arr):
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has negative or non-finite entries")
    sums = arr.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > _ROW_TOL):
        raise ValueError(f"{name} rows must sum to 1, got {sums}")


@dataclass
class Hmm:
    initial: np.ndarray
    transition: np.ndarray
    emission: np.ndarray
    length_mode: str = NATIVE
    pad_length: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.initial = np.ascontiguousarray(self.initial, dtype=np.float64)
        self.transition = np.ascontiguousarray(self.transition, dtype=np.float64)
        self.emission = np.ascontiguousarray(self.emission, dtype=np.float64)
        Q = self.initial.shape[0]
        if self.transition.shape != (Q, Q) or self.emission.ndim != 2 or self.emission.shape[0] != Q:
            raise ValueError(
                f"inconsistent shapes: initial {self.initial.shape}, "
                f"transition {self.transition.shape}, emission {self.emission.shape}"
            )
        _check_stochastic("initial", self.initial)
        _check_stochastic("transition", self.transition)
        _check_stochastic("emission", self.emission)
        if self.length_mode not in LENGTH_MODES:
            raise ValueError(f"unknown length_mode {self.length_mode!r}")
        if self.length_mode == PAD_STOP and (self.pad_length is None or self.pad_length < 1):
            raise ValueError("pad_stop models need a positive pad_length")

    @property
    def n_states(self) -> int:
        return self.initial.shape[0]

    @property
    def alphabet_size(self) -> int:
        """Number of real symbols, excluding the stop symbol."""
        M = self.emission.shape[1]
        return M - 1 if self.length_mode == PAD_STOP else M

    @property
    def stop_symbol(self) -> int | None:
        return self.alphabet_size + 1 if self.length_mode == PAD_STOP else None

    def prepare(self, seq: Sequence[int]) -> np.ndarray:
        """1-based symbols -> 0-based array ready for scoring, padded or cut
        in pad_stop mode."""
        arr = _as_symbols(seq, self.emission.shape[1])
        if self.length_mode == PAD_STOP:
            arr = pad_with_stop(arr + 1, self.pad_length, self.stop_symbol) - 1
        return arr

    def score(self, seq: Sequence[int]) -> float:
        return float(kernels.forward_loglik(self.initial, self.transition, self.emission, self.prepare(seq)))

    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "alphabet_size": self.alphabet_size,
            "length_mode": self.length_mode,
            "pad_length": self.pad_length,
            "initial": self.initial.tolist(),
            "transition": self.transition.tolist(),
            "emission": self.emission.tolist(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Hmm":
        h = cls(
            np.array(d["initial"]),
            np.array(d["transition"]),
            np.array(d["emission"]),
            d.get("length_mode", NATIVE),
            d.get("pad_length"),
            dict(d.get("meta", {})),
        )
        if h.n_states != d["n_states"] or h.alphabet_size != d["alphabet_size"]:
            raise ValueError("shape fields disagree with matrix shapes")
        return h


def _as_symbols(seq, n_columns) -> np.ndarray:
    arr = np.asarray(seq, dtype=np.int64)
    if arr.ndim != 1 or arr.size == 0:
        raise SymbolOutOfRange("sequence must be a non-empty 1-D list of symbols")
    if arr.min() < 1 or arr.max() > n_columns:
        raise SymbolOutOfRange(f"symbols must lie in 1..{n_columns}, got range {arr.min()}..{arr.max()}")
    return arr - 1


def pad_with_stop(seq, length: int, stop: int) -> np.ndarray:
    """Right-pad with ``stop`` to ``length``; longer sequences are cut."""
    arr = np.asarray(seq, dtype=np.int64)[:length]
    if arr.size < length:
        arr = np.concatenate([arr, np.full(length - arr.size, stop, dtype=np.int64)])
    return arr


def forward_log_likelihood(h: Hmm, seq: Sequence[int]) -> float:
    """log P(seq | h) by the scaled forward recursion, with no padding.

    Returns ``-inf`` when the sequence has probability zero.
    """
    arr = _as_symbols(seq, h.emission.shape[1])
    return float(kernels.forward_loglik(h.initial, h.transition, h.emission, arr))


@dataclass
class TrainConfig:
    max_iters: int = 100
    ll_tol: float = 1e-6
    seed: int = 0
    restarts: int = 5
    length_mode: str = NATIVE
    uniform_initial: bool = False
    smoothing: float = 1e-10

    def __post_init__(self):
        if self.max_iters < 1 or self.restarts < 1:
            raise ValueError("max_iters and restarts must be >= 1")
        if self.length_mode not in LENGTH_MODES:
            raise ValueError(f"unknown length_mode {self.length_mode!r}")


def _pack(seqs: list[np.ndarray]):
    offsets = np.zeros(len(seqs) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(s) for s in seqs])
    obs = np.ascontiguousarray(np.concatenate(seqs), dtype=np.int64)
    return obs, offsets


def _normalise(counts, eps):
    counts = counts + eps
    return counts / counts.sum(axis=-1, keepdims=True)


def _random_model(rng, Q, M, uniform_initial):
    pi = np.full(Q, 1.0 / Q) if uniform_initial else rng.dirichlet(np.ones(Q))
    A = rng.dirichlet(np.ones(Q), size=Q)
    B = rng.dirichlet(np.ones(M), size=Q)
    return pi, A, B


def _em(obs, offsets, pi, A, B, cfg):
    history = []
    it = 0
    while True:
        ll_seq, pc, ac, bc = kernels.estep(pi, A, B, obs, offsets)
        ll = float(ll_seq.sum())
        history.append(ll)
        if it == cfg.max_iters:
            break
        if it >= 1 and ll - history[-2] < cfg.ll_tol * abs(history[-2]):
            break
        if not cfg.uniform_initial:
            pi = _normalise(pc, cfg.smoothing)
        A = _normalise(ac, cfg.smoothing)
        B = _normalise(bc, cfg.smoothing)
        it += 1
    return pi, A, B, history


def baum_welch(data: Iterable[Sequence[int]], Q: int, M: int, cfg: TrainConfig | None = None,
               hook: Callable[[list], None] | None = None) -> tuple[Hmm, list[float]]:
    """Fit a Q-state, M-symbol HMM to a set of sequences by EM.

    Expected counts are pooled over all sequences each iteration. Runs
    ``cfg.restarts`` seeded random initialisations and keeps the one with the
    best final total log-likelihood. Returns the model and the total
    log-likelihood of every successive iterate.
    """
    cfg = cfg or TrainConfig()
    seqs = [np.asarray(s, dtype=np.int64) for s in data]
    if not seqs or any(s.size == 0 for s in seqs):
        raise EmptyData("need at least one non-empty sequence")
    if Q < 1 or M < 1:
        raise ValueError("Q and M must be >= 1")
    lo = min(int(s.min()) for s in seqs)
    hi = max(int(s.max()) for s in seqs)
    if lo < 1 or hi > M:
        raise AlphabetMismatch(f"symbols span {lo}..{hi}, alphabet is 1..{M}")
    if hook is not None:
        hook(seqs)

    pad_length = None
    n_cols = M
    if cfg.length_mode == PAD_STOP:
        pad_length = max(s.size for s in seqs)
        n_cols = M + 1
        seqs = [pad_with_stop(s, pad_length, M + 1) for s in seqs]
    obs, offsets = _pack([s - 1 for s in seqs])

    best = None
    for restart, child in enumerate(np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)):
        rng = np.random.default_rng(child)
        pi, A, B = _random_model(rng, Q, n_cols, cfg.uniform_initial)
        pi, A, B, history = _em(obs, offsets, pi, A, B, cfg)
        if best is None or history[-1] > best[3][-1]:
            best = (pi, A, B, history, restart)
    pi, A, B, history, restart = best
    meta = {"log_likelihood": history[-1], "iterations": len(history) - 1, "restart": restart,
            "n_sequences": len(seqs)}
    return Hmm(pi, A, B, cfg.length_mode, pad_length, meta), history


def sample(h: Hmm, T: int, seed: int) -> list[int]:
    """Draw T symbols (1-based) from the model."""
    if T < 1:
        raise ValueError("T must be >= 1")
    rng = np.random.default_rng(seed)
    u = rng.random((T, 2))

    def draw(p, x):
        cs = np.cumsum(p)
        return min(int(np.searchsorted(cs / cs[-1], x, side="right")), len(p) - 1)

    out = []
    state = draw(h.initial, u[0, 0])
    for t in range(T):
        if t > 0:
            state = draw(h.transition[state], u[t, 0])
        out.append(draw(h.emission[state], u[t, 1]) + 1)
    return out


def random_hmm(Q: int, M: int, seed, concentration: float = 1.0) -> Hmm:
    """Random model with Dirichlet(concentration) rows."""
    rng = np.random.default_rng(seed)
    return Hmm(rng.dirichlet(np.full(Q, concentration)),
               rng.dirichlet(np.full(Q, concentration), size=Q),
               rng.dirichlet(np.full(M, concentration), size=Q))


def word_seed(seed: int, word: str) -> int:
    """Per-word seed, stable across processes."""
    ss = np.random.SeedSequence([seed, zlib.crc32(word.encode("utf-8"))])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass
class WordModelBank:
    models: dict[str, Hmm]
    alphabet_size: int
    length_mode: str = NATIVE

    def __post_init__(self):
        for w, h in self.models.items():
            if h.alphabet_size != self.alphabet_size:
                raise AlphabetMismatch(f"model {w!r} has alphabet {h.alphabet_size}, bank has {self.alphabet_size}")

    def __len__(self):
        return len(self.models)

    def __getitem__(self, word):
        return self.models[word]

    @property
    def words(self) -> list[str]:
        return sorted(self.models)

    def subset(self, words: Iterable[str]) -> "WordModelBank":
        return WordModelBank({w: self.models[w] for w in words}, self.alphabet_size, self.length_mode)

    def to_dict(self) -> dict:
        return {
            "alphabet_size": self.alphabet_size,
            "length_mode": self.length_mode,
            "models": {w: self.models[w].to_dict() for w in self.words},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "WordModelBank":
        return cls({w: Hmm.from_dict(m) for w, m in d["models"].items()}, d["alphabet_size"],
                   d.get("length_mode", NATIVE))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "WordModelBank":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def phoneme_state_rule(pdict=None, minimum: int = 2) -> Callable[[str], int]:
    """Q = number of distinct phonemes in the word's pronunciation (at least
    ``minimum``); words missing from the dictionary get ``minimum``."""
    if pdict is None:
        from .lexicon import bundled_lexicon

        pdict = bundled_lexicon()

    def rule(word):
        if word in pdict:
            return max(minimum, len(set(pdict.pronounce(word))))
        return minimum

    return rule


def train_bank(word_data: Mapping[str, Sequence[Sequence[int]]], M: int,
               q_per_word: Mapping[str, int] | Callable[[str], int] | None = None,
               cfg: TrainConfig | None = None, default_q: Callable[[str], int] | None = None,
               hook: Callable[[str, list], None] | None = None) -> WordModelBank:
    cfg = cfg or TrainConfig()
    if callable(q_per_word):
        default_q, q_per_word = q_per_word, {}
    q_per_word = dict(q_per_word or {})
    default_q = default_q or phoneme_state_rule()
    models = {}
    for word in sorted(word_data):
        seqs = list(word_data[word])
        if len(seqs) < 2:
            raise TooFewSequences(word, len(seqs), 2)
        Q = q_per_word.get(word) or default_q(word)
        wcfg = TrainConfig(cfg.max_iters, cfg.ll_tol, word_seed(cfg.seed, word), cfg.restarts,
                           cfg.length_mode, cfg.uniform_initial, cfg.smoothing)
        word_hook = (lambda s, w=word: hook(w, s)) if hook is not None else None
        h, _ = baum_welch(seqs, Q, M, wcfg, hook=word_hook)
        log.info("trained %s: Q=%d ll=%.4f iters=%d", word, Q, h.meta["log_likelihood"], h.meta["iterations"])
        models[word] = h
    return WordModelBank(models, M, cfg.length_mode)


def decode_word(bank: WordModelBank, seq: Sequence[int]) -> tuple[str, dict[str, float]]:
    """Most likely word for ``seq``; ties go to the lexicographically smaller word."""
    if not len(bank):
        raise ValueError("empty model bank")
    scores = {w: bank.models[w].score(seq) for w in bank.words}
    best = None
    for w in bank.words:
        if best is None or scores[w] > scores[best]:
            best = w
    return best, scores
