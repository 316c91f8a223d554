"""k-means on the (a, b) chroma plane and lip-cluster selection."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .. import kernels

log = logging.getLogger(__name__)

MAX_ITERS = 100
MOVE_TOL = 1e-6
N_INIT = 4


@dataclass
class Clustering:
    assignments: np.ndarray  # cluster index per pixel, frame-shaped
    centroids: np.ndarray  # (k, 2) centroid (a, b)
    inertia_history: list[float]
    iterations: int
    degenerate: bool = False

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def _kmeans_pp(points, k, rng):
    n = len(points)
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(np.searchsorted(np.cumsum(d2) / total, rng.random(), side="right"))
            idx = min(idx, n - 1)
        else:
            # every point coincides with a chosen centre
            idx = int(rng.integers(n))
        centroids[j] = points[idx]
        d2 = np.minimum(d2, ((points - centroids[j]) ** 2).sum(axis=1))
    return centroids


def kmeans(points: np.ndarray, k: int, seed: int, n_init: int = N_INIT):
    """Lloyd iterations from ``n_init`` seeded k-means++ starts; the run
    with the lowest final inertia wins (first one on ties).

    Returns ``(labels, centroids, inertia_history, iterations)`` of that
    run. The history records the inertia of each assignment step, which
    never increases.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    n = len(points)
    if n < k:
        raise ValueError(f"need at least k={k} points, got {n}")
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    best = None
    for child in np.random.SeedSequence(seed).spawn(n_init):
        run = _lloyd(points, k, np.random.default_rng(child))
        if best is None or run[2][-1] < best[2][-1]:
            best = run
    return best


def _lloyd(points, k, rng):
    centroids = _kmeans_pp(points, k, rng)
    history = []
    labels, inertia = kernels.kmeans_assign(points, centroids)
    history.append(inertia)
    it = 0
    while it < MAX_ITERS:
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, points)
        new = centroids.copy()
        nz = counts > 0
        new[nz] = sums[nz] / counts[nz, None]
        move = np.sqrt(((new - centroids) ** 2).sum(axis=1)).max()
        centroids = new
        it += 1
        labels, inertia = kernels.kmeans_assign(points, centroids)
        history.append(inertia)
        if move < MOVE_TOL:
            break
    return labels, centroids, history, it


def kmeans_ab(lab: np.ndarray, k: int = 3, seed: int = 0, n_init: int = N_INIT) -> Clustering:
    """Cluster the pixels of a LAB frame on their (a, b) values.

    When the frame has fewer distinct (a, b) values than ``k`` the result is
    flagged ``degenerate`` and some centroids coincide.
    """
    if not 2 <= k <= 4:
        raise ValueError("k must be in 2..4")
    lab = np.asarray(lab, dtype=np.float64)
    shape = lab.shape[:-1]
    points = lab.reshape(-1, 3)[:, 1:]
    labels, centroids, history, it = kmeans(points, k, seed, n_init)
    degenerate = len(np.unique(points, axis=0)) < k
    if degenerate:
        log.warning("fewer than %d distinct chroma values; clustering is degenerate", k)
    return Clustering(labels.reshape(shape), centroids, history, it, degenerate)


def lip_cluster_index(centroids: np.ndarray, tie_tol: float = 1e-9) -> int:
    """0-based index of the cluster with the highest a; ties go to the lowest b."""
    a = centroids[:, 0]
    tied = np.flatnonzero(a >= a.max() - tie_tol)
    return int(tied[np.argmin(centroids[tied, 1])])


def select_lip_cluster(c: Clustering) -> np.ndarray:
    if c.k < 2:
        raise ValueError("need at least two clusters")
    return c.assignments == lip_cluster_index(c.centroids)
