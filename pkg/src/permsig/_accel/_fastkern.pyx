# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled trial-scoring kernels.

Same contracts as pykernels, written as plain C loops that release the GIL,
so chunks of trials running on different worker threads execute in parallel.
Results agree with the numpy backend to floating-point roundoff.
"""

import numpy as np

cimport cython
from libc.math cimport exp, tanh
from libc.stdint cimport int64_t

NAME = "compiled"


cdef inline double _sigmoid(double v) noexcept nogil:
    cdef double e
    if v >= 0.0:
        return 1.0 / (1.0 + exp(-v))
    e = exp(v)
    return e / (1.0 + e)


@cython.boundscheck(False)
@cython.wraparound(False)
def mlp_block_trials(model, Xs, rows, block_cols, perms):
    """(T, nt) logits; see pykernels.mlp_block_trials for the contract.

    Only the block columns differ between trials, so the first layer's
    contribution from all other columns is accumulated once per scored row
    and reused across the whole chunk.
    """
    cdef const double[:, ::1] X = np.ascontiguousarray(Xs, dtype=np.float64)
    cdef const int64_t[::1] row_v = np.ascontiguousarray(rows, dtype=np.int64)
    cdef const int64_t[::1] cols_v = np.ascontiguousarray(block_cols, dtype=np.int64)
    cdef const int64_t[:, ::1] perm_v = np.ascontiguousarray(perms, dtype=np.int64)

    p = model.params
    cdef const double[:, ::1] w1 = p["w1"]
    cdef const double[::1] b1 = p["b1"]
    cdef const double[:, ::1] w2 = p["w2"]
    cdef const double[::1] b2 = p["b2"]
    cdef const double[:, ::1] w3 = p["w3"]
    cdef const double[::1] b3 = p["b3"]

    cdef Py_ssize_t n_trials = perm_v.shape[0]
    cdef Py_ssize_t nt = row_v.shape[0]
    cdef Py_ssize_t m = X.shape[1]
    cdef Py_ssize_t h1 = w1.shape[1]
    cdef Py_ssize_t h2 = w2.shape[1]
    cdef Py_ssize_t nb = cols_v.shape[0]

    in_block = np.zeros(m, dtype=np.uint8)
    in_block[np.asarray(block_cols, dtype=np.int64)] = 1
    cdef const unsigned char[::1] mask = in_block

    out_arr = np.empty((n_trials, nt))
    cdef double[:, ::1] out = out_arr
    fixed_arr = np.empty((nt, h1))
    cdef double[:, ::1] fixed = fixed_arr
    scratch = np.empty(h1 + h2)
    cdef double[::1] buf = scratch
    cdef double[::1] z1 = buf[:h1]
    cdef double[::1] z2 = buf[h1:]

    cdef Py_ssize_t ti, i, j, k, base, donor, col
    cdef double acc, xv

    with nogil:
        for i in range(nt):
            base = row_v[i]
            for k in range(h1):
                fixed[i, k] = b1[k]
            for j in range(m):
                if not mask[j]:
                    xv = X[base, j]
                    for k in range(h1):
                        fixed[i, k] += xv * w1[j, k]

        for ti in range(n_trials):
            for i in range(nt):
                donor = perm_v[ti, i]
                for k in range(h1):
                    z1[k] = fixed[i, k]
                for j in range(nb):
                    col = cols_v[j]
                    xv = X[donor, col]
                    for k in range(h1):
                        z1[k] += xv * w1[col, k]
                for k in range(h1):
                    if z1[k] < 0.0:
                        z1[k] = 0.0

                for k in range(h2):
                    z2[k] = b2[k]
                for j in range(h1):
                    xv = z1[j]
                    if xv != 0.0:
                        for k in range(h2):
                            z2[k] += xv * w2[j, k]
                for k in range(h2):
                    if z2[k] < 0.0:
                        z2[k] = 0.0

                acc = b3[0]
                for k in range(h2):
                    acc += z2[k] * w3[k, 0]
                out[ti, i] = acc
    return out_arr


@cython.boundscheck(False)
@cython.wraparound(False)
def gru_block_trials(model, padded, lengths, rows, block_cols, perms):
    """(T, nt) logits; see pykernels.gru_block_trials for the contract."""
    cdef const double[:, :, ::1] P = np.ascontiguousarray(padded, dtype=np.float64)
    cdef const int64_t[::1] len_v = np.ascontiguousarray(lengths, dtype=np.int64)
    cdef const int64_t[::1] row_v = np.ascontiguousarray(rows, dtype=np.int64)
    cdef const int64_t[::1] cols_v = np.ascontiguousarray(block_cols, dtype=np.int64)
    cdef const int64_t[:, ::1] perm_v = np.ascontiguousarray(perms, dtype=np.int64)

    p = model.params
    cdef const double[:, ::1] wr = p["wr"]
    cdef const double[:, ::1] ur = p["ur"]
    cdef const double[::1] br = p["br"]
    cdef const double[:, ::1] wz = p["wz"]
    cdef const double[:, ::1] uz = p["uz"]
    cdef const double[::1] bz = p["bz"]
    cdef const double[:, ::1] wh = p["wh"]
    cdef const double[:, ::1] uh = p["uh"]
    cdef const double[::1] bh = p["bh"]
    cdef const double[:, ::1] a1 = p["a1"]
    cdef const double[::1] c1 = p["c1"]
    cdef const double[::1] a2 = p["a2"]
    cdef const double[::1] c2 = p["c2"]

    cdef Py_ssize_t n_trials = perm_v.shape[0]
    cdef Py_ssize_t nt = row_v.shape[0]
    cdef Py_ssize_t m = P.shape[2]
    cdef Py_ssize_t H = ur.shape[0]
    cdef Py_ssize_t F = a1.shape[0]
    cdef Py_ssize_t nb = cols_v.shape[0]

    out_arr = np.empty((n_trials, nt))
    cdef double[:, ::1] out = out_arr
    scratch = np.empty(m + 5 * H + F)
    cdef double[::1] buf = scratch
    cdef double[::1] x = buf[:m]
    cdef double[::1] h = buf[m : m + H]
    cdef double[::1] r = buf[m + H : m + 2 * H]
    cdef double[::1] z = buf[m + 2 * H : m + 3 * H]
    cdef double[::1] hbar = buf[m + 3 * H : m + 4 * H]
    cdef double[::1] uhh = buf[m + 4 * H : m + 5 * H]
    cdef double[::1] q1 = buf[m + 5 * H :]

    cdef Py_ssize_t ti, i, t, j, k, base, donor, T_i
    cdef double acc, xv

    with nogil:
        for ti in range(n_trials):
            for i in range(nt):
                base = row_v[i]
                donor = perm_v[ti, i]
                T_i = len_v[base]
                for k in range(H):
                    h[k] = 0.0
                for t in range(T_i):
                    for j in range(m):
                        x[j] = P[base, t, j]
                    for j in range(nb):
                        x[cols_v[j]] = P[donor, t, cols_v[j]]

                    # gates: r, z, and the cached uh @ h_prev
                    for k in range(H):
                        r[k] = br[k]
                        z[k] = bz[k]
                        hbar[k] = bh[k]
                        uhh[k] = 0.0
                    for j in range(m):
                        xv = x[j]
                        for k in range(H):
                            r[k] += wr[k, j] * xv
                            z[k] += wz[k, j] * xv
                            hbar[k] += wh[k, j] * xv
                    for j in range(H):
                        xv = h[j]
                        if xv != 0.0:
                            for k in range(H):
                                r[k] += ur[k, j] * xv
                                z[k] += uz[k, j] * xv
                                uhh[k] += uh[k, j] * xv
                    for k in range(H):
                        r[k] = _sigmoid(r[k])
                        z[k] = _sigmoid(z[k])
                        hbar[k] = tanh(hbar[k] + r[k] * uhh[k])
                        h[k] = z[k] * h[k] + (1.0 - z[k]) * hbar[k]

                for k in range(F):
                    acc = c1[k]
                    for j in range(H):
                        acc += a1[k, j] * h[j]
                    q1[k] = acc if acc > 0.0 else 0.0
                acc = c2[0]
                for k in range(F):
                    acc += a2[k] * q1[k]
                out[ti, i] = acc
    return out_arr
