"""Block-fading MIMO channel, orthogonal pilots, and ML channel estimation.

The receiver never sees the true channel matrix H, only its pilot-based
maximum-likelihood estimate. With orthogonal training the estimation
error is white, so the conditional law of H given the estimate is a
complex Gaussian with a scalar shrinkage of the estimate as mean. All
samplers are pure functions of (inputs, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import Seed, _zmcscg

__all__ = [
    "ChannelParams",
    "ChannelEstimate",
    "estimation_stats",
    "sample_channel",
    "apply_channel",
    "make_pilots",
    "ml_estimate",
    "sample_posterior",
    "sample_estimate_marginal",
]


@dataclass(frozen=True)
class ChannelParams:
    """Static description of one MIMO link operating point.

    n_tx, n_rx     antennas at transmitter / receiver
    channel_var    per-entry variance of H (sigma_H^2)
    noise_var      per-entry noise variance (sigma_Z^2)
    data_power     average data symbol power per transmit antenna (P bar)
    pilot_power    average pilot symbol power per transmit antenna
    n_pilots       training vectors per channel estimate (N >= n_tx)
    """

    n_tx: int
    n_rx: int
    channel_var: float = 1.0
    noise_var: float = 1.0
    data_power: float = 1.0
    pilot_power: float = 1.0
    n_pilots: int = 2

    def __post_init__(self):
        if self.n_tx < 1 or self.n_rx < 1:
            raise ValueError("antenna counts must be positive")
        for name in ("channel_var", "noise_var", "data_power", "pilot_power"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.n_pilots < self.n_tx:
            raise ValueError(
                f"orthogonal training requires n_pilots >= n_tx "
                f"(got N={self.n_pilots} < M_T={self.n_tx})"
            )

    @property
    def train_snr(self) -> float:
        """Training SNR: N * pilot_power / noise_var."""
        return self.n_pilots * self.pilot_power / self.noise_var

    @property
    def err_var(self) -> float:
        """Per-entry estimation error variance, 1 / train_snr."""
        return 1.0 / self.train_snr

    @property
    def shrinkage(self) -> float:
        """Posterior shrinkage of the estimate toward zero (delta in (0,1))."""
        s = self.train_snr * self.channel_var
        return s / (s + 1.0)


@dataclass(frozen=True)
class ChannelEstimate:
    """ML channel estimate plus the statistics defining the posterior of H.

    h_hat      n_rx x n_tx complex estimate
    train_snr  training SNR the estimate was formed at
    err_var    estimation error variance per entry (= 1/train_snr)
    shrinkage  posterior shrinkage factor delta in (0,1)
    """

    h_hat: np.ndarray
    train_snr: float
    err_var: float
    shrinkage: float

    def __post_init__(self):
        if not (0.0 < self.shrinkage < 1.0):
            raise ValueError(f"shrinkage must lie in (0,1), got {self.shrinkage}")
        if abs(self.err_var * self.train_snr - 1.0) > 1e-9:
            raise ValueError("err_var must equal 1/train_snr")

    @classmethod
    def from_matrix(cls, h_hat: np.ndarray, params: ChannelParams) -> "ChannelEstimate":
        return cls(
            h_hat=np.asarray(h_hat, dtype=complex),
            train_snr=params.train_snr,
            err_var=params.err_var,
            shrinkage=params.shrinkage,
        )


def estimation_stats(params: ChannelParams) -> tuple[float, float, float]:
    """(train_snr, err_var, shrinkage) implied by the training setup."""
    return params.train_snr, params.err_var, params.shrinkage


def sample_channel(params: ChannelParams, seed: Seed, size: int | None = None) -> np.ndarray:
    """Draw H with i.i.d. CN(0, channel_var) entries.

    Returns (n_rx, n_tx), or (size, n_rx, n_tx) when size is given.
    """
    rng = seed.generator()
    shape = (params.n_rx, params.n_tx) if size is None else (size, params.n_rx, params.n_tx)
    return _zmcscg(rng, shape, params.channel_var)


def apply_channel(x: np.ndarray, h: np.ndarray, noise_var: float, seed: Seed) -> np.ndarray:
    """One channel use: y = H x + z with z ~ CN(0, noise_var I)."""
    x = np.asarray(x, dtype=complex)
    h = np.asarray(h, dtype=complex)
    if x.shape[0] != h.shape[1]:
        raise ValueError(f"symbol length {x.shape[0]} does not match n_tx {h.shape[1]}")
    rng = seed.generator()
    z = _zmcscg(rng, (h.shape[0],), noise_var) if noise_var > 0 else 0.0
    return h @ x + z


def make_pilots(params: ChannelParams) -> np.ndarray:
    """Orthogonal training matrix X_T (n_tx x N) with X_T X_T^H = N P_T I.

    Rows of the N-point DFT matrix scaled to pilot power; exactly
    orthogonal for any N >= n_tx.
    """
    m, n = params.n_tx, params.n_pilots
    if n < m:
        raise ValueError(f"need n_pilots >= n_tx, got {n} < {m}")
    k = np.arange(n)
    rows = np.exp(-2j * np.pi * np.outer(np.arange(m), k) / n)
    return math.sqrt(params.pilot_power) * rows


def ml_estimate(y_train: np.ndarray, pilots: np.ndarray, params: ChannelParams) -> ChannelEstimate:
    """Least-squares/ML estimate from the training observation.

    H_hat = Y_T X_T^H (X_T X_T^H)^-1; with orthogonal pilots the error is
    white with per-entry variance noise_var / (N * pilot_power).
    """
    y_train = np.asarray(y_train, dtype=complex)
    pilots = np.asarray(pilots, dtype=complex)
    gram = pilots @ pilots.conj().T
    # guard against a caller passing rank-deficient training
    if np.linalg.cond(gram) > 1e12:
        raise np.linalg.LinAlgError("pilot Gram matrix is singular")
    h_hat = y_train @ pilots.conj().T @ np.linalg.inv(gram)
    return ChannelEstimate.from_matrix(h_hat, params)


def sample_posterior(est: ChannelEstimate, seed: Seed, size: int | None = None) -> np.ndarray:
    """Draw H from its conditional law given the estimate.

    H | H_hat ~ CN(delta * H_hat, delta * err_var per entry); the
    posterior concentrates on H_hat as the training SNR grows.
    """
    rng = seed.generator()
    mean = est.shrinkage * est.h_hat
    var = est.shrinkage * est.err_var
    shape = mean.shape if size is None else (size, *mean.shape)
    return mean + _zmcscg(rng, shape, var)


def sample_estimate_marginal(params: ChannelParams, seed: Seed) -> ChannelEstimate:
    """Draw an estimate from its marginal: CN(0, channel_var + err_var) entries."""
    rng = seed.generator()
    h_hat = _zmcscg(rng, (params.n_rx, params.n_tx), params.channel_var + params.err_var)
    return ChannelEstimate.from_matrix(h_hat, params)
