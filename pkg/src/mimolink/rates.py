"""Achievable information rates of both decoders and outage-rate Monte Carlo.

For a fixed (true channel, estimate) pair, the maximal rate of a
nearest-neighbor receiver with a given per-letter metric is the mutual
information of the worst test channel satisfying a power-trace
constraint and a metric-dominance constraint. With an isotropic Gaussian
input both optimizations collapse to closed forms after rotating the
estimate into the true channel's singular basis:

* improved metric: the constraint set is a ball around -a * h_tilde of
  squared radius b; the minimizing gain profile is collinear with
  h_tilde with norm |sqrt(b) - |a| * ||h_tilde|||.
* mismatched metric: a half-space constraint; the minimizer is the real
  projection of the singular values onto h_tilde.

The constants (a, lambda_n) involve t^n e^t Gamma(-n, t) evaluated at
t = sigma_Z^2 / (delta P sigma_E^2); for very small estimation error the
defining combination cancels to O(1/t^2) and is evaluated in extended
precision.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import (ChannelEstimate, ChannelParams, sample_estimate_marginal,
                      sample_posterior)
from .numerics import Seed, _zmcscg, empirical_quantile, gamma_star

__all__ = [
    "DegenerateConfigError",
    "RateConstants",
    "RotatedEstimate",
    "RatePoint",
    "lemma_expectation",
    "rate_constants",
    "rotate",
    "rate_improved",
    "rate_mismatched",
    "mutual_info",
    "eio_capacity",
    "outage_rate",
    "expected_outage_rate",
    "expected_rate_curves",
    "RATE_SERIES",
]

RATE_SERIES = ("mismatched", "improved", "eio_capacity", "perfect_csi")

# above this the a-coefficient bracket cancels past double precision
_MP_THRESHOLD = 100.0


class DegenerateConfigError(ArithmeticError):
    """A rate-constant denominator or test-channel variance vanished."""


@dataclass(frozen=True)
class RateConstants:
    """Metric-dependent constants of the improved-decoder rate formula.

    a_coef   mixing coefficient between the true channel and the estimate
             in the dominance constraint
    lam      t^n e^t Gamma(-n, t) at t = noise_var/(shrinkage*P*err_var)
    order    n = n_tx - 1
    """

    a_coef: float
    lam: float
    order: int
    shrinkage: float
    err_var: float
    noise_var: float
    data_power: float


@dataclass(frozen=True)
class RotatedEstimate:
    """Estimate expressed in the singular basis of the true channel.

    u, v             unitary factors of H = U diag(lam) V^H
    lam              singular values, descending
    h_tilde          diagonal of U^H H_hat V
    offdiag_energy   ||H_hat||_F^2 - ||h_tilde||^2
    """

    u: np.ndarray
    v: np.ndarray
    lam: np.ndarray
    h_tilde: np.ndarray
    offdiag_energy: float


@dataclass(frozen=True)
class RatePoint:
    snr_db: float
    value_bits: float
    decoder: str

    def __post_init__(self):
        if self.value_bits < 0:
            raise ValueError("rates are nonnegative")
        if self.decoder not in RATE_SERIES:
            raise ValueError(f"unknown decoder series {self.decoder!r}")


def lemma_expectation(a, k1: float, k2: float, data_power: float) -> float:
    """Closed form of E[(|A x|^2 + K1) / (|x|^2 + K2)], x ~ CN(0, P I).

    Equals F/(n+1) + (K1/K2 - F/(n+1)) * t^{n+1} e^t Gamma(-n, t) with
    F = ||A||_F^2, n = n_tx - 1 and t = K2/P.
    """
    a = np.asarray(a, dtype=complex)
    if k1 <= 0 or k2 <= 0:
        raise ValueError("K1 and K2 must be positive")
    if data_power <= 0:
        raise ValueError("data_power must be positive")
    n = a.shape[1] - 1
    t = k2 / data_power
    fro2 = float(np.sum(np.abs(a) ** 2))
    base = fro2 / (n + 1)
    return base + (k1 / k2 - base) * t * gamma_star(n, t)


def _constants_mp(n: int, t: float, shrinkage: float):
    """Extended-precision evaluation of (lam, a) for large t.

    Uses the finite reduction of Gamma(-n, t) to the order-zero function
    at a working precision that absorbs the O(t^2) cancellation of the
    denominator bracket.
    """
    import mpmath as mp

    dps = 40 + int(2 * math.log10(max(t, 10.0)))
    with mp.workdps(dps):
        tm = mp.mpf(t)
        acc = mp.mpf(0)
        fact_i = mp.mpf(1)
        for i in range(n):
            acc += (-1) ** i * fact_i / tm ** (i + 1)
            fact_i *= i + 1
        gneg = (-1) ** n / fact_i * (mp.e1(tm) - mp.e ** (-tm) * acc)
        lam = tm ** n * mp.e ** tm * gneg
        bracket = (n + 1) * lam + tm * lam - 1
        if bracket == 0:
            raise DegenerateConfigError("rate-constant denominator vanished")
        a = mp.mpf(shrinkage) * (1 - tm * lam) / bracket
        return float(lam), float(a)


def rate_constants(params: ChannelParams) -> RateConstants:
    """Constants (a, lambda_n) implied by the training configuration.

    The displayed form of the mixing coefficient,

        a = delta (delta s_E^2 P - lam s_Z^2)
            / (M_T delta s_E^2 lam P + lam s_Z^2 - delta s_E^2 P),

    reduces after dividing by delta s_E^2 P to
    a = delta (1 - t lam) / (M_T lam + t lam - 1), which is the form
    evaluated here.
    """
    m_t = params.n_tx
    n = m_t - 1
    delta = params.shrinkage
    t = params.noise_var / (delta * params.data_power * params.err_var)
    if t <= 0:
        raise DegenerateConfigError("nonpositive gamma argument")
    if t > _MP_THRESHOLD:
        lam, a = _constants_mp(n, t, delta)
    else:
        lam = gamma_star(n, t)
        bracket = m_t * lam + t * lam - 1.0
        if abs(bracket) < 1e-12 * (m_t * lam + t * lam + 1.0):
            raise DegenerateConfigError(
                f"rate-constant denominator vanished (t={t:.6g}, M_T={m_t})")
        a = delta * (1.0 - t * lam) / bracket
    return RateConstants(a_coef=a, lam=lam, order=n,
                         shrinkage=delta, err_var=params.err_var,
                         noise_var=params.noise_var, data_power=params.data_power)


def rotate(h, h_hat) -> RotatedEstimate:
    """Factor H and express the estimate in its singular basis."""
    h = np.asarray(h, dtype=complex)
    h_hat = np.asarray(h_hat, dtype=complex)
    if h.shape[0] != h.shape[1]:
        raise ValueError("rate formulas require a square channel (n_tx == n_rx)")
    if h_hat.shape != h.shape:
        raise ValueError("estimate shape must match the channel")
    u, s, vh = np.linalg.svd(h)
    v = vh.conj().T
    rotated = u.conj().T @ h_hat @ v
    h_tilde = np.diagonal(rotated).copy()
    offdiag = float(np.sum(np.abs(h_hat) ** 2) - np.sum(np.abs(h_tilde) ** 2))
    return RotatedEstimate(u=u, v=v, lam=s, h_tilde=h_tilde,
                           offdiag_energy=max(offdiag, 0.0))


def _rotated_batch(h_batch: np.ndarray, h_hat: np.ndarray):
    u, s, vh = np.linalg.svd(h_batch)
    v = np.conj(np.transpose(vh, (0, 2, 1)))
    rotated = np.conj(np.transpose(u, (0, 2, 1))) @ h_hat @ v
    h_tilde = np.diagonal(rotated, axis1=1, axis2=2)
    hat_fro2 = float(np.sum(np.abs(h_hat) ** 2))
    offdiag = np.maximum(hat_fro2 - np.sum(np.abs(h_tilde) ** 2, axis=1), 0.0)
    return s, h_tilde, offdiag


def _improved_batch(h_batch, h_hat, consts: RateConstants, params: ChannelParams,
                    strict_origin: bool = False,
                    rotated=None) -> np.ndarray:
    a = consts.a_coef
    p = params.data_power
    m_r = params.n_rx
    s, h_tilde, offdiag = rotated if rotated is not None else _rotated_batch(h_batch, h_hat)
    diff2 = np.sum(np.abs(h_batch + a * h_hat) ** 2, axis=(1, 2))
    b = diff2 - a * a * offdiag
    ht2 = np.sum(np.abs(h_tilde) ** 2, axis=1)
    lam2 = np.sum(s ** 2, axis=1)

    ok = (b >= 0.0) & (ht2 > 0.0)
    safe_ht2 = np.where(ht2 > 0.0, ht2, 1.0)
    coef = np.where(ok, np.sqrt(np.maximum(b, 0.0) / safe_ht2) - abs(a), 0.0)
    if strict_origin:
        # zero vector feasible when the ball contains the origin
        ok &= b < a * a * ht2
        coef = np.where(ok, coef, 0.0)
    mu2 = coef ** 2 * ht2
    sigma2 = (p / m_r) * (lam2 - mu2) + params.noise_var
    if np.any(sigma2 <= 0.0):
        raise DegenerateConfigError("test-channel variance fell to zero "
                                    "(gain profile exceeded the channel norm)")
    gains = p * (coef[:, None] ** 2) * np.abs(h_tilde) ** 2 / sigma2[:, None]
    return np.where(ok, np.sum(np.log2(1.0 + gains), axis=1), 0.0)


def _mismatched_batch(h_batch, h_hat, params: ChannelParams,
                      rotated=None) -> np.ndarray:
    p = params.data_power
    m_r = params.n_rx
    s, h_tilde, _ = rotated if rotated is not None else _rotated_batch(h_batch, h_hat)
    ht2 = np.sum(np.abs(h_tilde) ** 2, axis=1)
    lam2 = np.sum(s ** 2, axis=1)
    inner = np.real(np.sum(s * h_tilde, axis=1))
    ok = ht2 > 0.0
    coef = np.where(ok, inner / np.where(ok, ht2, 1.0), 0.0)
    mu2 = coef ** 2 * ht2
    sigma2 = (p / m_r) * (lam2 - mu2) + params.noise_var
    if np.any(sigma2 <= 0.0):
        raise DegenerateConfigError("test-channel variance fell to zero")
    gains = p * (coef[:, None] ** 2) * np.abs(h_tilde) ** 2 / sigma2[:, None]
    rates = np.sum(np.log2(1.0 + gains), axis=1)
    return np.maximum(np.where(ok, rates, 0.0), 0.0)


def _mutual_batch(h_batch, params: ChannelParams) -> np.ndarray:
    s = np.linalg.svd(h_batch, compute_uv=False)
    return np.sum(np.log2(1.0 + params.data_power * s ** 2 / params.noise_var), axis=1)


def rate_improved(h, h_hat, params: ChannelParams,
                  constants: RateConstants | None = None,
                  strict_origin: bool = False) -> float:
    """Achievable rate (bits/channel use) of the improved-metric receiver."""
    if constants is None:
        constants = rate_constants(params)
    h = np.asarray(h, dtype=complex)
    if h.shape[0] != h.shape[1]:
        raise ValueError("rate formulas require a square channel")
    return float(_improved_batch(h[None], np.asarray(h_hat, dtype=complex),
                                 constants, params, strict_origin)[0])


def rate_mismatched(h, h_hat, params: ChannelParams) -> float:
    """Achievable rate of the mismatched (estimate-plugging) ML receiver."""
    h = np.asarray(h, dtype=complex)
    if h.shape[0] != h.shape[1]:
        raise ValueError("rate formulas require a square channel")
    return float(_mismatched_batch(h[None], np.asarray(h_hat, dtype=complex), params)[0])


def mutual_info(h, params: ChannelParams) -> float:
    """log2 det(I + (P/sigma_Z^2) H H^H): the perfect-knowledge rate."""
    h = np.asarray(h, dtype=complex)
    return float(_mutual_batch(h[None], params)[0])


def _check_mc_args(gamma: float, n_samples: int):
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    if n_samples < 1000:
        raise ValueError("quantile estimation needs n_samples >= 1000")


def eio_capacity(est: ChannelEstimate, gamma: float, params: ChannelParams,
                 n_samples: int, seed: Seed) -> float:
    """Outage capacity given the estimate, with a fixed isotropic Gaussian input.

    The largest rate supported by every channel state in a posterior set
    of probability >= 1 - gamma is attained by taking that set to be a
    superlevel set of the mutual information, so the sup-inf reduces to
    the lower gamma-quantile of mutual_info over posterior draws.
    """
    _check_mc_args(gamma, n_samples)
    h = sample_posterior(est, seed, size=n_samples)
    return empirical_quantile(_mutual_batch(h, params), gamma)


def outage_rate(kind: str, est: ChannelEstimate, gamma: float, params: ChannelParams,
                n_samples: int, seed: Seed, strict_origin: bool = False) -> float:
    """gamma-quantile of the decoder's instantaneous rate over the posterior."""
    _check_mc_args(gamma, n_samples)
    if kind not in ("improved", "mismatched"):
        raise ValueError(f"unknown decoder kind {kind!r}")
    h = sample_posterior(est, seed, size=n_samples)
    if kind == "improved":
        vals = _improved_batch(h, est.h_hat, rate_constants(params), params,
                               strict_origin)
    else:
        vals = _mismatched_batch(h, est.h_hat, params)
    return empirical_quantile(vals, gamma)


def _outer_curves_sample(args):
    """One outer Monte Carlo draw: all four series on shared inner draws."""
    params, gamma, n_inner, root, path = args
    seed = Seed(root, path)
    est = sample_estimate_marginal(params, seed.child(0))
    h = sample_posterior(est, seed.child(1), size=n_inner)
    consts = rate_constants(params)
    rotated = _rotated_batch(h, est.h_hat)
    imp = _improved_batch(h, est.h_hat, consts, params, rotated=rotated)
    mis = _mismatched_batch(h, est.h_hat, params, rotated=rotated)
    mut = np.sum(np.log2(1.0 + params.data_power * rotated[0] ** 2 / params.noise_var),
                 axis=1)
    h_prior = _zmcscg(seed.child(2).generator(), h.shape, params.channel_var)
    perfect = float(np.mean(_mutual_batch(h_prior, params)))
    return (empirical_quantile(mis, gamma), empirical_quantile(imp, gamma),
            empirical_quantile(mut, gamma), perfect)


def expected_rate_curves(params: ChannelParams, gamma: float, n_outer: int,
                         n_inner: int, seed: Seed, workers: int = 1) -> dict:
    """Mean-over-estimates outage rates of all four series at one SNR point.

    Returns {series: (mean, standard_error)} for mismatched, improved,
    eio_capacity and perfect_csi (the last is the ergodic perfect-CSI
    mean, not an outage quantile). Inner draws are shared across the
    three outage series, and outer draws are reduced in index order so
    worker count never changes the output.
    """
    if params.n_tx != params.n_rx:
        raise ValueError("rate curves require n_tx == n_rx")
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    if n_outer < 1 or n_inner < 100:
        raise ValueError("need n_outer >= 1 and n_inner >= 100")
    tasks = [(params, gamma, n_inner, seed.root, seed.path + (i,))
             for i in range(n_outer)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_outer_curves_sample, tasks,
                               chunksize=max(1, n_outer // (workers * 4))))
    else:
        rows = [_outer_curves_sample(t) for t in tasks]
    arr = np.asarray(rows)  # (n_outer, 4) in series order below
    names = ("mismatched", "improved", "eio_capacity", "perfect_csi")
    out = {}
    for i, name in enumerate(names):
        col = arr[:, i]
        out[name] = (float(col.mean()), float(col.std(ddof=1) / math.sqrt(len(col)))
                     if len(col) > 1 else 0.0)
    return out


def expected_outage_rate(kind: str, gamma: float, params: ChannelParams,
                         n_outer: int, n_inner: int, seed: Seed,
                         workers: int = 1) -> tuple[float, float]:
    """Mean over channel estimates of the decoder's outage rate, with SE."""
    if n_outer < 100 or n_inner < 100:
        raise ValueError("n_outer and n_inner must both be >= 100")
    if kind not in ("improved", "mismatched", "eio_capacity"):
        raise ValueError(f"unknown decoder kind {kind!r}")
    curves = expected_rate_curves(params, gamma, n_outer, n_inner, seed, workers)
    return curves[kind]
