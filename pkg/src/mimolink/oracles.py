"""Independent reference implementations used for cross-validation.

Everything here recomputes a quantity along a different path than the
production code: brute-force Bayes instead of the demapper's leave-one-
out products, codeword enumeration instead of the forward-backward
recursion, Monte Carlo instead of closed forms, golden-section search
instead of the rate formula's algebraic minimizer. The selftest
subcommand and the test suite both drive these.
"""

from __future__ import annotations

import math

import numpy as np

from .bicm.code import ConvCode, conv_encode
from .bicm.mapping import Constellation, compound_candidates
from .channel import ChannelEstimate, ChannelParams
from .metrics import MetricEvaluator
from .numerics import Seed, _zmcscg
from .rates import RateConstants, _rotated_batch

__all__ = [
    "brute_force_demap",
    "enumerate_map_bits",
    "mc_lemma_estimate",
    "composite_mc_neg_log",
    "golden_section_boundary_rate",
]


def brute_force_demap(y, evaluator: MetricEvaluator, priors,
                      constellation: Constellation, n_tx: int) -> np.ndarray:
    """Direct Bayes computation of the demapper extrinsics.

    Sums exp(-metric) times the explicit product of the other bits'
    priors over every candidate, with no leave-one-out shortcuts. Only
    feasible for B * n_tx <= 8 or so.
    """
    y = np.asarray(y, dtype=complex)
    priors = np.asarray(priors, dtype=float)
    symbols, bits = compound_candidates(constellation, n_tx)
    n_cand, nb = bits.shape
    scores = np.array([evaluator.score(symbols[c], y) for c in range(n_cand)])
    w = np.exp(-(scores - scores.min()))
    out = np.zeros((nb, 2))
    for j in range(nb):
        for b in (0, 1):
            tot = 0.0
            for c in range(n_cand):
                if bits[c, j] != b:
                    continue
                prod = 1.0
                for i in range(nb):
                    if i != j:
                        prod *= priors[i, bits[c, i]]
                tot += w[c] * prod
            out[j, b] = tot
    return out / out.sum(axis=1, keepdims=True)


def enumerate_map_bits(bit_probs, n_info: int, code: ConvCode = ConvCode()):
    """Exact per-bit posteriors by enumerating every information word.

    bit_probs: (n_coded, 2) input probabilities on the coded bits.
    Returns (info_app1, coded_app1): posterior-of-one for each info and
    coded bit. Exponential in n_info; keep n_info <= ~14.
    """
    bit_probs = np.asarray(bit_probs, dtype=float)
    n_words = 1 << n_info
    shifts = np.arange(n_info - 1, -1, -1)
    words = ((np.arange(n_words)[:, None] >> shifts) & 1).astype(np.uint8)
    n_coded = 2 * (n_info + code.memory)
    if bit_probs.shape != (n_coded, 2):
        raise ValueError(f"bit_probs must have shape ({n_coded}, 2)")
    coded = np.empty((n_words, n_coded), dtype=np.uint8)
    for w in range(n_words):
        coded[w] = conv_encode(words[w], code)
    probs = np.take_along_axis(bit_probs[None, :, :],
                               coded[:, :, None].astype(np.intp), axis=2)[:, :, 0]
    weights = probs.prod(axis=1)
    total = weights.sum()
    if total <= 0:
        raise ValueError("all codewords have zero likelihood")
    info_app1 = (weights[:, None] * words).sum(axis=0) / total
    coded_app1 = (weights[:, None] * coded).sum(axis=0) / total
    return info_app1, coded_app1


def mc_lemma_estimate(a, k1: float, k2: float, data_power: float,
                      n_draws: int, seed: Seed):
    """Monte Carlo estimate (mean, se) of E[(|A x|^2 + K1)/(|x|^2 + K2)]."""
    a = np.asarray(a, dtype=complex)
    n_tx = a.shape[1]
    rng = seed.generator()
    x = _zmcscg(rng, (n_draws, n_tx), data_power)
    ax = x @ a.T
    num = np.sum(np.abs(ax) ** 2, axis=1) + k1
    den = np.sum(np.abs(x) ** 2, axis=1) + k2
    vals = num / den
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_draws))


def composite_mc_neg_log(x, y, est: ChannelEstimate, noise_var: float,
                         n_draws: int, seed: Seed) -> float:
    """-log of the posterior-averaged channel likelihood, by Monte Carlo.

    Draws the channel from its conditional law given the estimate,
    averages the Gaussian likelihood of (x, y) in the log domain, and
    returns the negative log average. The improved metric must equal
    this value minus n_rx*log(pi), up to MC error.
    """
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    rng = seed.generator()
    n_rx = est.h_hat.shape[0]
    mean = est.shrinkage * est.h_hat
    h = mean[None, :, :] + _zmcscg(rng, (n_draws, *est.h_hat.shape),
                                   est.shrinkage * est.err_var)
    resid = y[None, :] - h @ x
    loglik = (-n_rx * math.log(math.pi * noise_var)
              - np.sum(np.abs(resid) ** 2, axis=1) / noise_var)
    peak = loglik.max()
    avg = peak + math.log(np.mean(np.exp(loglik - peak)))
    return -avg


def _rate_of_mu(mu, lam2, params: ChannelParams) -> float:
    p = params.data_power
    sigma2 = (p / params.n_rx) * (lam2 - float(np.sum(np.abs(mu) ** 2))) + params.noise_var
    if sigma2 <= 0:
        return math.inf
    return float(np.sum(np.log2(1.0 + p * np.abs(mu) ** 2 / sigma2)))


def golden_section_boundary_rate(h, h_hat, params: ChannelParams,
                                 consts: RateConstants, n_iter: int = 200) -> float:
    """Numerical minimum rate over the constraint-sphere slice mu = c*h_tilde.

    Parametrizes c = -a + (sqrt(b)/||h_tilde||) e^{i phi} on the boundary
    of the dominance ball and golden-sections phi over [0, pi] (the rate
    is even in phi). Cross-checks the closed-form minimizer.
    """
    h = np.asarray(h, dtype=complex)[None]
    h_hat = np.asarray(h_hat, dtype=complex)
    s, h_tilde, offdiag = _rotated_batch(h, h_hat)
    s, h_tilde, offdiag = s[0], h_tilde[0], float(offdiag[0])
    a = consts.a_coef
    b = float(np.sum(np.abs(h[0] + a * h_hat) ** 2)) - a * a * offdiag
    ht_norm = math.sqrt(float(np.sum(np.abs(h_tilde) ** 2)))
    if b < 0 or ht_norm == 0:
        return 0.0
    radius = math.sqrt(b) / ht_norm
    lam2 = float(np.sum(s ** 2))

    def rate_at(phi: float) -> float:
        c = -a + radius * complex(math.cos(phi), math.sin(phi))
        return _rate_of_mu(c * h_tilde, lam2, params)

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    lo, hi = 0.0, math.pi
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = rate_at(x1), rate_at(x2)
    for _ in range(n_iter):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = rate_at(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = rate_at(x2)
    best = min(f1, f2, rate_at(lo), rate_at(hi))
    return best
