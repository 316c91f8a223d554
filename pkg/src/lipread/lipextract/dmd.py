"""Background/foreground separation by exact dynamic mode decomposition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, RankTooLarge
from .frames import to_gray

DT = 1.0
OMEGA_TOL = 1e-2


@dataclass
class DmdResult:
    background: np.ndarray  # (n_frames, H, W)
    foreground: np.ndarray  # (n_frames, H, W), >= 0
    eigenvalues: np.ndarray
    omegas: np.ndarray
    background_modes: np.ndarray  # indices into eigenvalues
    rank: int


def dmd_separate(frames, rank: int, omega_tol: float = OMEGA_TOL, dt: float = DT) -> DmdResult:
    """Split a frame sequence into a slowly varying background and a
    non-negative foreground.

    Frames are converted to grayscale and stacked as columns. Modes whose
    continuous-time frequency ``|log(lambda)| / dt`` is below ``omega_tol``
    make up the background; the foreground is the original minus the
    background, clamped at zero.
    """
    frames = [np.asarray(f) for f in frames]
    if len(frames) < 3:
        raise ValueError(f"need at least 3 frames, got {len(frames)}")
    grays = [to_gray(f) for f in frames]
    shape = grays[0].shape
    if any(g.shape != shape for g in grays):
        raise DimensionMismatch("all frames must share dimensions")
    m = len(grays)
    if rank < 1 or rank > m - 1:
        raise RankTooLarge(f"rank must lie in 1..{m - 1}, got {rank}")

    X = np.stack([g.ravel() for g in grays], axis=1)
    X1, X2 = X[:, :-1], X[:, 1:]
    U, s, Vh = np.linalg.svd(X1, full_matrices=False)
    # drop numerically null directions; they carry no dynamics
    keep = s > s[0] * max(X1.shape) * np.finfo(float).eps if s[0] > 0 else np.zeros_like(s, dtype=bool)
    r = max(1, min(rank, int(keep.sum())))
    U, s, V = U[:, :r], s[:r], Vh[:r].conj().T
    if s[0] == 0:
        background = np.zeros_like(X)
        lam = np.zeros(0)
        omega = np.zeros(0)
        bg_idx = np.zeros(0, dtype=int)
    else:
        Atilde = U.conj().T @ X2 @ V / s
        lam, W = np.linalg.eig(Atilde)
        Phi = X2 @ V / s @ W
        with np.errstate(divide="ignore"):
            omega = np.log(lam.astype(complex)) / dt
        bg_idx = np.flatnonzero(np.abs(omega) < omega_tol)
        b = np.linalg.lstsq(Phi, X[:, 0].astype(complex), rcond=None)[0]
        t = np.arange(m) * dt
        dynamics = b[bg_idx, None] * np.exp(omega[bg_idx, None] * t[None, :])
        background = (Phi[:, bg_idx] @ dynamics).real
    foreground = np.maximum(X - background, 0.0)
    return DmdResult(
        background.T.reshape((m,) + shape),
        foreground.T.reshape((m,) + shape),
        lam,
        omega,
        bg_idx,
        r,
    )
