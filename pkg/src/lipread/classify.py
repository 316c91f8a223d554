"""Frame classification: truncated SVD projection, Gaussian naive Bayes and
k-nearest neighbours.

Features are columns of a D x N matrix. Classifiers operate on the N x r
coordinate rows of the right singular vectors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyClass, NumericalFailure, RankTooLarge

DEFAULT_RANK = 30
VAR_FLOOR_SCALE = 1e-9


@dataclass
class FeatureMatrix:
    values: np.ndarray  # D x N
    column_ids: list[tuple[str, int]]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] < 1:
            raise ValueError("feature matrix must be D x N with N >= 1")
        if len(self.column_ids) != self.values.shape[1]:
            raise DimensionMismatch("one column id per column required")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature matrix has non-finite entries")


@dataclass
class SvdProjection:
    left_vectors: np.ndarray  # D x r
    singular_values: np.ndarray  # r
    mean: np.ndarray | None = None  # D, when centred

    @property
    def rank(self) -> int:
        return len(self.singular_values)

    @property
    def dim(self) -> int:
        return self.left_vectors.shape[0]

    def to_dict(self):
        return {
            "dim": self.dim,
            "rank": self.rank,
            "left_vectors": self.left_vectors.tolist(),
            "singular_values": self.singular_values.tolist(),
            "mean": None if self.mean is None else self.mean.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        mean = d.get("mean")
        p = cls(np.array(d["left_vectors"], dtype=np.float64).reshape(d["dim"], d["rank"]),
                np.array(d["singular_values"], dtype=np.float64),
                None if mean is None else np.array(mean, dtype=np.float64))
        return p


def _null_tol(s, shape) -> float:
    return s[0] * max(shape) * np.finfo(float).eps if s.size and s[0] > 0 else 0.0


def numerical_rank(X, center: bool = False) -> int:
    X = np.asarray(X, dtype=np.float64)
    if center:
        X = X - X.mean(axis=1, keepdims=True)
    s = np.linalg.svd(X, compute_uv=False)
    return int((s > _null_tol(s, X.shape)).sum())


def fit_svd(X, r: int = DEFAULT_RANK, center: bool = False) -> tuple[SvdProjection, np.ndarray]:
    """Rank-r truncated SVD of the D x N matrix ``X``.

    Returns the projection and the N x r matrix of right singular vector
    rows, one row per column of ``X``.
    """
    X = np.asarray(X.values if isinstance(X, FeatureMatrix) else X, dtype=np.float64)
    D, N = X.shape
    if not 1 <= r <= min(D, N):
        raise RankTooLarge(f"rank {r} outside 1..{min(D, N)}")
    mean = X.mean(axis=1) if center else None
    if center:
        X = X - mean[:, None]
    try:
        U, s, Vh = np.linalg.svd(X, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc
    tol = _null_tol(s, (D, N))
    if s[r - 1] <= tol:
        raise RankTooLarge(f"matrix has numerical rank {int((s > tol).sum())}, asked for {r}")
    return SvdProjection(U[:, :r].copy(), s[:r].copy(), mean), Vh[:r].T.copy()


def project(p: SvdProjection, x) -> np.ndarray:
    """Coordinates ``S^-1 U^T x`` of one vector (D,) or of columns (D, K);
    columns map to rows of the result."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != p.dim:
        raise DimensionMismatch(f"expected dimension {p.dim}, got {x.shape[0]}")
    if p.mean is not None:
        x = x - (p.mean if x.ndim == 1 else p.mean[:, None])
    coords = (p.left_vectors.T @ x) / (p.singular_values if x.ndim == 1 else p.singular_values[:, None])
    return coords if x.ndim == 1 else coords.T


def split(n: int, train_fraction: float = 0.75, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Random train/test partition of ``range(n)``; both index arrays sorted."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    n_train = math.floor(train_fraction * n + 0.5)
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


@dataclass
class GaussianNBModel:
    classes: np.ndarray
    priors: np.ndarray
    means: np.ndarray  # (C, r)
    variances: np.ndarray  # (C, r)
    var_floor: float

    def log_posterior(self, coords) -> np.ndarray:
        coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
        if coords.shape[1] != self.means.shape[1]:
            raise DimensionMismatch(f"expected dimension {self.means.shape[1]}, got {coords.shape[1]}")
        diff = coords[:, None, :] - self.means[None, :, :]
        ll = -0.5 * (np.log(2 * np.pi * self.variances)[None] + diff ** 2 / self.variances[None]).sum(axis=2)
        return ll + np.log(self.priors)[None, :]

    def predict(self, coords) -> np.ndarray:
        # argmax takes the first maximum: ties go to the lower label
        return self.classes[self.log_posterior(coords).argmax(axis=1)]

    def to_dict(self):
        return {"kind": "nb", "classes": self.classes.tolist(), "priors": self.priors.tolist(),
                "means": self.means.tolist(), "variances": self.variances.tolist(),
                "var_floor": self.var_floor}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["classes"], dtype=np.int64), np.array(d["priors"]),
                   np.array(d["means"]), np.array(d["variances"]), d["var_floor"])


def nb_train(coords, labels, classes: Sequence[int] | None = None) -> GaussianNBModel:
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64)
    if coords.shape[0] != labels.shape[0] or coords.shape[0] == 0:
        raise DimensionMismatch("need one label per coordinate row")
    present = np.unique(labels)
    classes = present if classes is None else np.unique(np.asarray(classes, dtype=np.int64))
    missing = np.setdiff1d(classes, present)
    if missing.size:
        raise EmptyClass(f"no training samples for classes {missing.tolist()}")
    if np.setdiff1d(present, classes).size:
        raise ValueError("labels outside the declared classes")
    global_var = coords.var(axis=0).mean()
    floor = VAR_FLOOR_SCALE * global_var if global_var > 0 else VAR_FLOOR_SCALE
    means = np.stack([coords[labels == c].mean(axis=0) for c in classes])
    variances = np.stack([coords[labels == c].var(axis=0) for c in classes])
    priors = np.array([(labels == c).sum() for c in classes], dtype=np.float64) / len(labels)
    return GaussianNBModel(classes, priors, means, np.maximum(variances, floor), floor)


def nb_predict(model: GaussianNBModel, coord):
    out = model.predict(coord)
    return int(out[0]) if np.ndim(coord) == 1 else out


@dataclass
class KnnModel:
    coords: np.ndarray
    labels: np.ndarray
    k: int = 1

    def __post_init__(self):
        self.coords = np.atleast_2d(np.asarray(self.coords, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.coords) == 0:
            raise ValueError("kNN model needs training data")
        if len(self.labels) != len(self.coords):
            raise DimensionMismatch("need one label per coordinate row")
        if not 1 <= self.k <= len(self.coords):
            raise ValueError(f"k must lie in 1..{len(self.coords)}")

    def predict(self, coords) -> np.ndarray:
        coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
        if coords.shape[1] != self.coords.shape[1]:
            raise DimensionMismatch(f"expected dimension {self.coords.shape[1]}, got {coords.shape[1]}")
        classes = np.unique(self.labels)
        lab_idx = np.searchsorted(classes, self.labels)
        # bound the (chunk, n_train, dim) temporary to ~16M floats
        chunk = max(1, 16_000_000 // self.coords.size)
        out = np.empty(len(coords), dtype=np.int64)
        for start in range(0, len(coords), chunk):
            q = coords[start:start + chunk]
            d2 = ((q[:, None, :] - self.coords[None, :, :]) ** 2).sum(axis=2)
            # stable sort: equal distances keep training order
            nearest = np.argsort(d2, axis=1, kind="stable")[:, :self.k]
            votes = np.zeros((len(q), len(classes)), dtype=np.int64)
            np.add.at(votes, (np.repeat(np.arange(len(q)), self.k), lab_idx[nearest].ravel()), 1)
            out[start:start + len(q)] = classes[votes.argmax(axis=1)]
        return out

    def to_dict(self):
        return {"kind": "knn", "k": self.k, "coords": self.coords.tolist(), "labels": self.labels.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["coords"], dtype=np.float64), np.array(d["labels"], dtype=np.int64), d["k"])


def knn_predict(model: KnnModel, coord):
    out = model.predict(coord)
    return int(out[0]) if np.ndim(coord) == 1 else out


def evaluate_classifier(predict: Callable, coords, labels, split_idx) -> float:
    """Fraction of the test indices whose prediction matches the label."""
    _, test = split_idx
    test = np.asarray(test, dtype=np.int64)
    if test.size == 0:
        return float("nan")
    coords = np.atleast_2d(np.asarray(coords))
    pred = np.asarray(predict(coords[test]))
    return float(np.mean(pred == np.asarray(labels)[test]))


@dataclass
class FrameClassifier:
    """SVD projection plus a classifier on the projected coordinates."""

    projection: SvdProjection
    model: GaussianNBModel | KnnModel
    mode: str = "viseme"

    def predict_columns(self, X) -> np.ndarray:
        return self.model.predict(project(self.projection, np.asarray(X)))

    def to_dict(self):
        return {"mode": self.mode, "projection": self.projection.to_dict(), "model": self.model.to_dict()}

    @classmethod
    def from_dict(cls, d):
        m = d["model"]
        model = GaussianNBModel.from_dict(m) if m["kind"] == "nb" else KnnModel.from_dict(m)
        return cls(SvdProjection.from_dict(d["projection"]), model, d.get("mode", "viseme"))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
