# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled receiver hot kernels: soft MIMO demapper and BCJR pass.

Contracts match mimolink._kernels_py exactly; the backend equivalence
tests hold both to 1e-12.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"

DEF MAX_BITS = 64
DEF MAX_STATES = 64


def demap_extrinsic(object weights, object bit_table, object priors, bint max_log=False):
    w_arr = np.ascontiguousarray(weights, dtype=np.float64)
    b_arr = np.ascontiguousarray(bit_table, dtype=np.uint8)
    p_arr = np.ascontiguousarray(priors, dtype=np.float64)

    cdef double[:, ::1] w = w_arr
    cdef cnp.uint8_t[:, ::1] bt = b_arr
    cdef double[:, :, ::1] pr = p_arr

    cdef Py_ssize_t n_frames = w.shape[0]
    cdef Py_ssize_t n_cand = w.shape[1]
    cdef Py_ssize_t nb = bt.shape[1]
    if nb > MAX_BITS:
        raise ValueError(f"too many bits per compound symbol ({nb} > {MAX_BITS})")
    if pr.shape[0] != n_frames or pr.shape[1] != nb or pr.shape[2] != 2:
        raise ValueError("priors shape mismatch")

    out_arr = np.zeros((n_frames, nb, 2), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr

    cdef double[MAX_BITS] fac
    cdef double[MAX_BITS + 1] pref
    cdef double[MAX_BITS + 1] suf
    cdef Py_ssize_t k, c, i
    cdef double wkc, contrib, total
    cdef int bit

    for k in range(n_frames):
        for c in range(n_cand):
            wkc = w[k, c]
            if wkc == 0.0:
                continue
            for i in range(nb):
                fac[i] = pr[k, i, bt[c, i]]
            pref[0] = 1.0
            for i in range(nb):
                pref[i + 1] = pref[i] * fac[i]
            suf[nb] = 1.0
            for i in range(nb - 1, -1, -1):
                suf[i] = suf[i + 1] * fac[i]
            for i in range(nb):
                contrib = wkc * pref[i] * suf[i + 1]
                bit = bt[c, i]
                if max_log:
                    if contrib > out[k, i, bit]:
                        out[k, i, bit] = contrib
                else:
                    out[k, i, bit] += contrib
        for i in range(nb):
            total = out[k, i, 0] + out[k, i, 1]
            if total <= 0.0:
                raise ValueError("demapper produced an all-zero bit posterior "
                                 "(weights or priors degenerate)")
            out[k, i, 0] /= total
            out[k, i, 1] /= total
    return out_arr


def bcjr_pass(object bit_metrics, object next_state, object out_bits):
    bm_arr = np.ascontiguousarray(bit_metrics, dtype=np.float64)
    nxt_arr = np.ascontiguousarray(next_state, dtype=np.int32)
    outb_arr = np.ascontiguousarray(out_bits, dtype=np.uint8)

    cdef double[:, :, ::1] bm = bm_arr
    cdef int[:, ::1] nxt = nxt_arr
    cdef cnp.uint8_t[:, :, ::1] outb = outb_arr

    cdef Py_ssize_t n_steps = bm.shape[0]
    cdef Py_ssize_t n_states = nxt.shape[0]
    if n_states > MAX_STATES:
        raise ValueError(f"too many trellis states ({n_states} > {MAX_STATES})")

    alpha_arr = np.zeros((n_steps + 1, n_states), dtype=np.float64)
    beta_arr = np.zeros((n_steps + 1, n_states), dtype=np.float64)
    gamma_arr = np.empty((n_steps, n_states, 2), dtype=np.float64)
    ext_arr = np.empty((n_steps, 2, 2), dtype=np.float64)
    app1_arr = np.empty(n_steps, dtype=np.float64)

    cdef double[:, ::1] alpha = alpha_arr
    cdef double[:, ::1] beta = beta_arr
    cdef double[:, :, ::1] gamma = gamma_arr
    cdef double[:, :, ::1] ext = ext_arr
    cdef double[::1] app1 = app1_arr

    cdef Py_ssize_t k, s, b, j
    cdef double tot, v, num1, den, e0, e1, other
    cdef double[MAX_STATES] work

    for k in range(n_steps):
        for s in range(n_states):
            for b in range(2):
                gamma[k, s, b] = bm[k, 0, outb[s, b, 0]] * bm[k, 1, outb[s, b, 1]]

    alpha[0, 0] = 1.0
    for k in range(n_steps):
        for s in range(n_states):
            work[s] = 0.0
        for s in range(n_states):
            if alpha[k, s] == 0.0:
                continue
            for b in range(2):
                work[nxt[s, b]] += alpha[k, s] * gamma[k, s, b]
        tot = 0.0
        for s in range(n_states):
            tot += work[s]
        if tot <= 0.0:
            raise ValueError(f"forward pass died at step {k} (all-zero metrics)")
        for s in range(n_states):
            alpha[k + 1, s] = work[s] / tot

    beta[n_steps, 0] = 1.0
    for k in range(n_steps - 1, -1, -1):
        tot = 0.0
        for s in range(n_states):
            v = 0.0
            for b in range(2):
                v += gamma[k, s, b] * beta[k + 1, nxt[s, b]]
            work[s] = v
            tot += v
        if tot <= 0.0:
            raise ValueError(f"backward pass died at step {k} (all-zero metrics)")
        for s in range(n_states):
            beta[k, s] = work[s] / tot

    for k in range(n_steps):
        num1 = 0.0
        den = 0.0
        for s in range(n_states):
            for b in range(2):
                v = alpha[k, s] * gamma[k, s, b] * beta[k + 1, nxt[s, b]]
                den += v
                if b == 1:
                    num1 += v
        if den <= 0.0:
            raise ValueError("zero total branch mass (all-zero metrics)")
        app1[k] = num1 / den

        for j in range(2):
            e0 = 0.0
            e1 = 0.0
            for s in range(n_states):
                for b in range(2):
                    other = bm[k, 1 - j, outb[s, b, 1 - j]]
                    v = alpha[k, s] * other * beta[k + 1, nxt[s, b]]
                    if outb[s, b, j]:
                        e1 += v
                    else:
                        e0 += v
            tot = e0 + e1
            if tot <= 0.0:
                raise ValueError("zero extrinsic mass on a coded bit")
            ext[k, j, 0] = e0 / tot
            ext[k, j, 1] = e1 / tot

    return ext_arr, app1_arr
