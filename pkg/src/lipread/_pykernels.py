"""Pure numpy implementations of the hot kernels.

Signatures match the compiled ``_kernels`` module exactly; ``lipread.kernels``
picks one at import time.
"""

import numpy as np
from scipy import ndimage

NAME = "python"


def forward_loglik(pi, A, B, obs):
    alpha = pi * B[:, obs[0]]
    c = alpha.sum()
    if c <= 0.0:
        return -np.inf
    alpha /= c
    ll = np.log(c)
    for o in obs[1:]:
        alpha = (alpha @ A) * B[:, o]
        c = alpha.sum()
        if c <= 0.0:
            return -np.inf
        alpha /= c
        ll += np.log(c)
    return float(ll)


def _estep_block(pi, A, B, obs):
    # obs: (S, T) sequences of one common length, vectorised over S
    S, T = obs.shape
    Q = A.shape[0]
    alpha = np.empty((T, S, Q))
    scale = np.empty((T, S))
    a = pi[None, :] * B[:, obs[:, 0]].T
    for t in range(T):
        if t > 0:
            a = (alpha[t - 1] @ A) * B[:, obs[:, t]].T
        c = a.sum(axis=1)
        scale[t] = c
        ok = c > 0
        a[ok] /= c[ok, None]
        alpha[t] = a
    ll = np.where((scale > 0).all(axis=0), np.log(np.where(scale > 0, scale, 1.0)).sum(axis=0), -np.inf)
    good = np.isfinite(ll)
    alpha, scale, obs = alpha[:, good], scale[:, good], obs[good]
    beta = np.ones((int(good.sum()), Q))
    Bo = B[:, obs.T].transpose(1, 2, 0)  # (T, S', Q)
    gamma = alpha[T - 1] * beta
    B_acc = np.zeros_like(B)
    A_acc = np.zeros_like(A)
    np.add.at(B_acc.T, obs[:, T - 1], gamma)
    for t in range(T - 2, -1, -1):
        w = Bo[t + 1] * beta / scale[t + 1][:, None]
        A_acc += alpha[t].T @ w * A
        beta = w @ A.T
        gamma = alpha[t] * beta
        np.add.at(B_acc.T, obs[:, t], gamma)
    pi_acc = gamma.sum(axis=0)
    return ll, pi_acc, A_acc, B_acc


def estep(pi, A, B, obs, offsets):
    """Expected counts summed over all sequences.

    ``obs`` holds every sequence back to back; sequence ``s`` is
    ``obs[offsets[s]:offsets[s + 1]]``. Returns per-sequence log-likelihoods
    and the accumulated initial, transition and emission counts. Sequences
    impossible under the model get -inf and contribute no counts.
    """
    n_seq = len(offsets) - 1
    lengths = np.diff(offsets)
    ll = np.empty(n_seq)
    pi_acc = np.zeros_like(pi)
    A_acc = np.zeros_like(A)
    B_acc = np.zeros_like(B)
    for L in np.unique(lengths):
        idx = np.flatnonzero(lengths == L)
        block = obs[offsets[idx][:, None] + np.arange(L)[None, :]]
        bll, p, a, b = _estep_block(pi, A, B, block)
        ll[idx] = bll
        pi_acc += p
        A_acc += a
        B_acc += b
    return ll, pi_acc, A_acc, B_acc


_NEIGHBOURS = {
    0: ((0, 1), (0, -1)),
    1: ((1, 1), (-1, -1)),
    2: ((1, 0), (-1, 0)),
    3: ((1, -1), (-1, 1)),
}


def nonmax_suppress(mag, direction):
    """Keep pixels that are at least as large as both neighbours along the
    quantised gradient direction (0: horizontal, 1: 45deg, 2: vertical,
    3: 135deg, row axis pointing down). Border pixels are zeroed."""
    H, W = mag.shape
    out = np.zeros_like(mag)
    if H < 3 or W < 3:
        return out
    core = mag[1:-1, 1:-1]
    keep = np.zeros(core.shape, dtype=bool)
    d = direction[1:-1, 1:-1]
    for code, ((r1, c1), (r2, c2)) in _NEIGHBOURS.items():
        n1 = mag[1 + r1:H - 1 + r1, 1 + c1:W - 1 + c1]
        n2 = mag[1 + r2:H - 1 + r2, 1 + c2:W - 1 + c2]
        keep |= (d == code) & (core >= n1) & (core >= n2)
    out[1:-1, 1:-1] = np.where(keep, core, 0.0)
    return out


def hysteresis(thin, low, high):
    """8-connected hysteresis: weak pixels survive when linked to a strong one."""
    weak = thin >= low
    strong = thin >= high
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return np.zeros(thin.shape, dtype=np.uint8)
    linked = np.zeros(n + 1, dtype=bool)
    linked[np.unique(labels[strong])] = True
    linked[0] = False
    return linked[labels].astype(np.uint8)


def kmeans_assign(points, centroids):
    d = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = d.argmin(axis=1)
    return labels.astype(np.int64), float(d[np.arange(len(points)), labels].sum())
