"""Pure numpy implementations of the receiver hot kernels.

Semantically identical to the compiled extension in _kernels.pyx; used
as the import-time fallback and as the reference side of the backend
equivalence tests. See mimolink.kernels for the dispatch.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def demap_extrinsic(weights, bit_table, priors, max_log=False):
    """Extrinsic bit probabilities of a soft symbol-to-bit MIMO demapper.

    weights    (L, C) nonnegative candidate likelihood weights, already
               exponentiated with a per-row max guard
    bit_table  (C, nb) uint8 bit pattern of each candidate
    priors     (L, nb, 2) per-bit prior probabilities [P(0), P(1)]
    max_log    replace sums over candidates by maxima (suboptimal, fast)

    Returns (L, nb, 2) normalized extrinsics, each excluding the bit's
    own prior. Raises ValueError if some bit's pair of sums is all zero
    (numeric misuse upstream).
    """
    weights = np.asarray(weights, dtype=np.float64)
    bit_table = np.asarray(bit_table, dtype=np.uint8)
    priors = np.asarray(priors, dtype=np.float64)
    n_frames, n_cand = weights.shape
    nb = bit_table.shape[1]

    # factors[l, c, i] = priors[l, i, bit_table[c, i]]
    factors = priors[:, np.arange(nb)[None, :], bit_table[None, :, :]]
    # leave-one-out products via exclusive prefix/suffix cumprods
    prefix = np.ones_like(factors)
    prefix[:, :, 1:] = np.cumprod(factors[:, :, :-1], axis=2)
    suffix = np.ones_like(factors)
    suffix[:, :, :-1] = np.cumprod(factors[:, :, :0:-1], axis=2)[:, :, ::-1]
    contrib = weights[:, :, None] * prefix * suffix  # (L, C, nb)

    mask1 = bit_table.astype(bool)[None, :, :]
    out = np.empty((n_frames, nb, 2))
    if max_log:
        c0 = np.where(mask1, 0.0, contrib)
        c1 = np.where(mask1, contrib, 0.0)
        out[:, :, 0] = c0.max(axis=1)
        out[:, :, 1] = c1.max(axis=1)
    else:
        out[:, :, 1] = np.einsum("lci,ci->li", contrib, bit_table.astype(np.float64))
        out[:, :, 0] = contrib.sum(axis=1) - out[:, :, 1]
    total = out.sum(axis=2)
    if np.any(total <= 0.0):
        raise ValueError("demapper produced an all-zero bit posterior "
                         "(weights or priors degenerate)")
    out /= total[:, :, None]
    return out


def bcjr_pass(bit_metrics, next_state, out_bits):
    """Forward-backward pass over a terminated rate-1/2 trellis.

    bit_metrics  (n_steps, 2, 2): [P(c=0), P(c=1)] for both coded bits of
                 each step
    next_state   (S, 2) int32
    out_bits     (S, 2, 2) uint8

    Returns (ext, app1): ext (n_steps, 2, 2) extrinsic probabilities on
    the coded bits (own input excluded), app1 (n_steps,) posterior that
    each step's input bit is one. Both trellis ends are pinned to state
    zero, so tail inputs are implicitly constrained.
    """
    bm = np.asarray(bit_metrics, dtype=np.float64)
    nxt = np.asarray(next_state)
    outb = np.asarray(out_bits)
    n_steps = bm.shape[0]
    n_states = nxt.shape[0]

    # gamma[k, s, b] = P(first coded bit = out0) * P(second = out1)
    g0 = bm[:, 0, :][:, outb[:, :, 0]]
    g1 = bm[:, 1, :][:, outb[:, :, 1]]
    gamma = g0 * g1  # (n_steps, S, 2)

    alpha = np.zeros((n_steps + 1, n_states))
    alpha[0, 0] = 1.0
    for k in range(n_steps):
        nk = np.zeros(n_states)
        np.add.at(nk, nxt.ravel(), (alpha[k][:, None] * gamma[k]).ravel())
        tot = nk.sum()
        if tot <= 0.0:
            raise ValueError(f"forward pass died at step {k} (all-zero metrics)")
        alpha[k + 1] = nk / tot

    beta = np.zeros((n_steps + 1, n_states))
    beta[n_steps, 0] = 1.0
    for k in range(n_steps - 1, -1, -1):
        bk = (gamma[k] * beta[k + 1][nxt]).sum(axis=1)
        tot = bk.sum()
        if tot <= 0.0:
            raise ValueError(f"backward pass died at step {k} (all-zero metrics)")
        beta[k] = bk / tot

    beta_next = beta[1:][np.arange(n_steps)[:, None, None], nxt[None, :, :]]  # (n, S, 2)
    a_sb = alpha[:-1][:, :, None]

    joint = a_sb * gamma * beta_next
    den = joint.sum(axis=(1, 2))
    if np.any(den <= 0.0):
        raise ValueError("zero total branch mass (all-zero metrics)")
    app1 = joint[:, :, 1].sum(axis=1) / den

    ext = np.empty((n_steps, 2, 2))
    for j in range(2):
        other = bm[:, 1 - j, :][:, outb[:, :, 1 - j]]  # own bit's factor excluded
        part = a_sb * other * beta_next  # (n, S, 2)
        sel1 = outb[:, :, j].astype(np.float64)[None, :, :]
        ext[:, j, 1] = (part * sel1).sum(axis=(1, 2))
        ext[:, j, 0] = (part * (1.0 - sel1)).sum(axis=(1, 2))
    tot = ext.sum(axis=2)
    if np.any(tot <= 0.0):
        raise ValueError("zero extrinsic mass on a coded bit")
    ext /= tot[:, :, None]
    return ext, app1
