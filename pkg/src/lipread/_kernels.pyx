# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. See ``_pykernels`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, INFINITY

cnp.import_array()

NAME = "cython"


cdef double _forward(const double[::1] pi, const double[:, ::1] A,
                     const double[:, ::1] B, const long long[::1] obs,
                     double[::1] alpha, double[::1] tmp) noexcept nogil:
    cdef Py_ssize_t Q = A.shape[0], T = obs.shape[0]
    cdef double c, ll, s
    cdef Py_ssize_t t, i, j
    cdef long long o = obs[0]
    c = 0.0
    for i in range(Q):
        alpha[i] = pi[i] * B[i, o]
        c += alpha[i]
    if c <= 0.0:
        return -INFINITY
    for i in range(Q):
        alpha[i] /= c
    ll = log(c)
    for t in range(1, T):
        o = obs[t]
        c = 0.0
        for j in range(Q):
            s = 0.0
            for i in range(Q):
                s += alpha[i] * A[i, j]
            tmp[j] = s * B[j, o]
            c += tmp[j]
        if c <= 0.0:
            return -INFINITY
        for j in range(Q):
            alpha[j] = tmp[j] / c
        ll += log(c)
    return ll


def forward_loglik(const double[::1] pi, const double[:, ::1] A,
                   const double[:, ::1] B, const long long[::1] obs):
    cdef Py_ssize_t Q = A.shape[0]
    cdef double[::1] alpha = np.empty(Q)
    cdef double[::1] tmp = np.empty(Q)
    cdef double ll
    with nogil:
        ll = _forward(pi, A, B, obs, alpha, tmp)
    return ll


cdef double _one_sequence(const double[::1] pi, const double[:, ::1] A,
                          const double[:, ::1] B, const long long[::1] obs,
                          Py_ssize_t start, Py_ssize_t T,
                          double[:, ::1] alpha, double[::1] scale,
                          double[::1] beta, double[::1] nbeta, double[::1] w,
                          double[::1] pi_acc, double[:, ::1] A_acc,
                          double[:, ::1] B_acc) noexcept nogil:
    cdef Py_ssize_t Q = A.shape[0]
    cdef Py_ssize_t t, i, j
    cdef double c, s, g, ll
    cdef long long o
    # forward pass
    o = obs[start]
    c = 0.0
    for i in range(Q):
        alpha[0, i] = pi[i] * B[i, o]
        c += alpha[0, i]
    if c <= 0.0:
        return -INFINITY
    scale[0] = c
    for i in range(Q):
        alpha[0, i] /= c
    ll = log(c)
    for t in range(1, T):
        o = obs[start + t]
        c = 0.0
        for j in range(Q):
            s = 0.0
            for i in range(Q):
                s += alpha[t - 1, i] * A[i, j]
            alpha[t, j] = s * B[j, o]
            c += alpha[t, j]
        if c <= 0.0:
            return -INFINITY
        scale[t] = c
        for j in range(Q):
            alpha[t, j] /= c
        ll += log(c)
    # backward pass with accumulation
    for i in range(Q):
        beta[i] = 1.0
    o = obs[start + T - 1]
    for i in range(Q):
        B_acc[i, o] += alpha[T - 1, i]
    for t in range(T - 2, -1, -1):
        o = obs[start + t + 1]
        for j in range(Q):
            w[j] = B[j, o] * beta[j] / scale[t + 1]
        for i in range(Q):
            s = 0.0
            for j in range(Q):
                A_acc[i, j] += alpha[t, i] * A[i, j] * w[j]
                s += A[i, j] * w[j]
            nbeta[i] = s
        o = obs[start + t]
        for i in range(Q):
            beta[i] = nbeta[i]
            g = alpha[t, i] * beta[i]
            B_acc[i, o] += g
            if t == 0:
                pi_acc[i] += g
    if T == 1:
        for i in range(Q):
            pi_acc[i] += alpha[0, i]
    return ll


def estep(const double[::1] pi, const double[:, ::1] A, const double[:, ::1] B,
          const long long[::1] obs, const long long[::1] offsets):
    cdef Py_ssize_t Q = A.shape[0], M = B.shape[1]
    cdef Py_ssize_t n_seq = offsets.shape[0] - 1
    cdef Py_ssize_t s, T, Tmax = 1
    for s in range(n_seq):
        T = offsets[s + 1] - offsets[s]
        if T > Tmax:
            Tmax = T
    ll_arr = np.empty(n_seq)
    pi_arr = np.zeros(Q)
    A_arr = np.zeros((Q, Q))
    B_arr = np.zeros((Q, M))
    cdef double[::1] ll = ll_arr
    cdef double[::1] pi_acc = pi_arr
    cdef double[:, ::1] A_acc = A_arr
    cdef double[:, ::1] B_acc = B_arr
    # per-sequence scratch so impossible sequences leave the totals untouched
    cdef double[::1] pi_s = np.zeros(Q)
    cdef double[:, ::1] A_s = np.zeros((Q, Q))
    cdef double[:, ::1] B_s = np.zeros((Q, M))
    cdef double[:, ::1] alpha = np.empty((Tmax, Q))
    cdef double[::1] scale = np.empty(Tmax)
    cdef double[::1] beta = np.empty(Q)
    cdef double[::1] nbeta = np.empty(Q)
    cdef double[::1] w = np.empty(Q)
    cdef Py_ssize_t i, j
    cdef double r
    with nogil:
        for s in range(n_seq):
            for i in range(Q):
                pi_s[i] = 0.0
                for j in range(Q):
                    A_s[i, j] = 0.0
                for j in range(M):
                    B_s[i, j] = 0.0
            T = offsets[s + 1] - offsets[s]
            r = _one_sequence(pi, A, B, obs, offsets[s], T, alpha, scale,
                              beta, nbeta, w, pi_s, A_s, B_s)
            ll[s] = r
            if r == -INFINITY:
                continue
            for i in range(Q):
                pi_acc[i] += pi_s[i]
                for j in range(Q):
                    A_acc[i, j] += A_s[i, j]
                for j in range(M):
                    B_acc[i, j] += B_s[i, j]
    return ll_arr, pi_arr, A_arr, B_arr


def nonmax_suppress(const double[:, ::1] mag, const signed char[:, ::1] direction):
    cdef Py_ssize_t H = mag.shape[0], W = mag.shape[1]
    out_arr = np.zeros((H, W))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t r, c
    cdef int dr, dc
    cdef signed char d
    cdef double m
    if H < 3 or W < 3:
        return out_arr
    with nogil:
        for r in range(1, H - 1):
            for c in range(1, W - 1):
                d = direction[r, c]
                if d == 0:
                    dr = 0; dc = 1
                elif d == 1:
                    dr = 1; dc = 1
                elif d == 2:
                    dr = 1; dc = 0
                else:
                    dr = 1; dc = -1
                m = mag[r, c]
                if m >= mag[r + dr, c + dc] and m >= mag[r - dr, c - dc]:
                    out[r, c] = m
    return out_arr


def hysteresis(const double[:, ::1] thin, double low, double high):
    cdef Py_ssize_t H = thin.shape[0], W = thin.shape[1]
    out_arr = np.zeros((H, W), dtype=np.uint8)
    cdef unsigned char[:, ::1] out = out_arr
    stack_arr = np.empty(H * W, dtype=np.intp)
    cdef Py_ssize_t[::1] stack = stack_arr
    cdef Py_ssize_t top = 0, r, c, rr, cc, p
    cdef int dr, dc
    with nogil:
        for r in range(H):
            for c in range(W):
                if thin[r, c] >= high and out[r, c] == 0:
                    out[r, c] = 1
                    stack[top] = r * W + c
                    top += 1
                    while top > 0:
                        top -= 1
                        p = stack[top]
                        rr = p // W
                        cc = p - rr * W
                        for dr in range(-1, 2):
                            for dc in range(-1, 2):
                                if rr + dr < 0 or rr + dr >= H or cc + dc < 0 or cc + dc >= W:
                                    continue
                                if out[rr + dr, cc + dc] == 0 and thin[rr + dr, cc + dc] >= low:
                                    out[rr + dr, cc + dc] = 1
                                    stack[top] = (rr + dr) * W + cc + dc
                                    top += 1
    return out_arr


def kmeans_assign(const double[:, ::1] points, const double[:, ::1] centroids):
    cdef Py_ssize_t n = points.shape[0], k = centroids.shape[0], dim = points.shape[1]
    labels_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] labels = labels_arr
    cdef Py_ssize_t i, j, d, best
    cdef double dist, bestd, diff, inertia = 0.0
    with nogil:
        for i in range(n):
            best = 0
            bestd = INFINITY
            for j in range(k):
                dist = 0.0
                for d in range(dim):
                    diff = points[i, d] - centroids[j, d]
                    dist += diff * diff
                if dist < bestd:
                    bestd = dist
                    best = j
            labels[i] = best
            inertia += bestd
    return labels_arr, inertia
