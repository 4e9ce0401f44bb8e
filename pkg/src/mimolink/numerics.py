"""Numerical primitives shared by the whole package.

Covers the upper incomplete gamma function at zero and negative integer
order (the exponential-integral family driving the rate constants),
reproducible hierarchical random streams, complex Gaussian sampling,
empirical quantiles, and a thin SVD wrapper for small dense complex
matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Seed",
    "gamma0",
    "gamma_neg_int",
    "gamma_star",
    "sample_zmcscg",
    "empirical_quantile",
    "svd",
]

_EULER_GAMMA = 0.5772156649015328606
# exp(-t) underflows past ~745.13; the function value is indistinguishable
# from zero in double precision there.
_UNDERFLOW_T = 745.0
# below this, the alternating series for Gamma(-n, t) loses at most
# ~t^n/n! in relative precision, which is harmless for n <= 8
_SERIES_CUTOVER = 10.0
_MAX_CF_ITER = 400


@dataclass(frozen=True)
class Seed:
    """Hierarchical reproducible random stream label.

    A stream is identified by a 64-bit root and a path of nonnegative
    indices (experiment, trial, draw, ...). Identical (root, path) pairs
    always produce identical streams; distinct paths produce streams that
    are statistically independent (keyed mixing via numpy's SeedSequence).
    """

    root: int
    path: tuple[int, ...] = field(default=())

    def child(self, *indices: int) -> "Seed":
        """Derive a sub-stream label by extending the path."""
        return Seed(self.root, self.path + tuple(int(i) for i in indices))

    def generator(self) -> np.random.Generator:
        """Fresh generator for this (root, path); never shared state."""
        ss = np.random.SeedSequence(self.root, spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(ss))


def _gamma0_series(t: float) -> float:
    # E1(t) = -gamma - ln t + sum_{k>=1} (-1)^{k+1} t^k / (k k!), good for t < 1
    total = -_EULER_GAMMA - math.log(t)
    term = 1.0
    for k in range(1, 60):
        term *= -t / k
        contrib = -term / k
        total += contrib
        if abs(contrib) < 1e-18 * max(abs(total), 1e-300):
            break
    return total


def _gamma_cf_factor(n: int, t: float) -> float:
    """Continued fraction for t^n e^t Gamma(-n, t), stable for t >= 1.

    Evaluates the Lentz form of the incomplete-gamma continued fraction
    with order a = -n, WITHOUT the e^-t t^-n prefactor, so the result
    neither under- nor overflows for any t.
    """
    a = -float(n)
    tiny = 1e-300
    b = t + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_CF_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise ArithmeticError(f"incomplete gamma continued fraction stalled at n={n}, t={t}")


def gamma0(t: float) -> float:
    """Upper incomplete gamma of order zero, Gamma(0, t) = E1(t).

    Power series below t = 1, continued fraction above; relative error
    <= 1e-10 over t in [1e-8, 700]. Returns 0.0 beyond the double
    underflow point t > 745.
    """
    t = float(t)
    if t <= 0.0:
        raise ValueError(f"gamma0 requires t > 0, got {t}")
    if t > _UNDERFLOW_T:
        return 0.0
    if t < 1.0:
        return _gamma0_series(t)
    return math.exp(-t) * _gamma_cf_factor(0, t)


def gamma_neg_int(n: int, t: float) -> float:
    """Gamma(-n, t) for nonnegative integer n and t > 0.

    Uses the finite alternating reduction to Gamma(0, t),

        Gamma(-n,t) = (-1)^n/n! * [Gamma(0,t) - e^-t sum_{i<n} (-1)^i i!/t^{i+1}],

    for small t, and the order -n continued fraction for large t where the
    reduction cancels catastrophically.
    """
    n = int(n)
    t = float(t)
    if n < 0:
        raise ValueError(f"gamma_neg_int requires n >= 0, got {n}")
    if t <= 0.0:
        raise ValueError(f"gamma_neg_int requires t > 0, got {t}")
    if n == 0:
        return gamma0(t)
    if t > _UNDERFLOW_T:
        return 0.0
    if t >= _SERIES_CUTOVER:
        return math.exp(-t) * t ** (-n) * _gamma_cf_factor(n, t)
    acc = 0.0
    fact_i = 1.0
    for i in range(n):
        acc += (-1.0) ** i * fact_i / t ** (i + 1)
        fact_i *= i + 1
    # fact_i is now n!
    sign = -1.0 if n % 2 else 1.0
    return sign / fact_i * (gamma0(t) - math.exp(-t) * acc)


def gamma_star(n: int, t: float) -> float:
    """The scaled product t^n e^t Gamma(-n, t), stable for every t > 0.

    This combination (not Gamma itself) is what the achievable-rate
    constants consume; for large t it tends to 1/t and must not be formed
    as a product of an overflowing and an underflowing factor.
    """
    n = int(n)
    t = float(t)
    if n < 0 or t <= 0.0:
        raise ValueError(f"gamma_star requires n >= 0 and t > 0, got n={n}, t={t}")
    if t >= _SERIES_CUTOVER:
        return _gamma_cf_factor(n, t)
    return t ** n * math.exp(t) * gamma_neg_int(n, t)


def sample_zmcscg(rows: int, cols: int, variance: float, seed: Seed) -> np.ndarray:
    """Matrix of i.i.d. zero-mean circularly symmetric complex Gaussians.

    Each entry has total variance `variance`, split evenly between the
    real and imaginary parts.
    """
    if variance <= 0.0:
        raise ValueError(f"variance must be positive, got {variance}")
    rng = seed.generator()
    return _zmcscg(rng, (rows, cols), variance)


def _zmcscg(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    scale = math.sqrt(variance / 2.0)
    re = rng.normal(0.0, scale, size=shape)
    im = rng.normal(0.0, scale, size=shape)
    return re + 1j * im


def empirical_quantile(samples, gamma: float) -> float:
    """Lower empirical gamma-quantile: the ceil(gamma*n)-th smallest value.

    gamma = 0 returns the minimum. Nondecreasing in gamma by construction.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("empirical_quantile requires a non-empty sample")
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    k = max(int(math.ceil(gamma * x.size)), 1)
    return float(np.partition(x, k - 1)[k - 1])


def svd(m: np.ndarray):
    """SVD of a small dense complex matrix: m = U diag(s) V^H.

    Returns (U, s, V) with U, V unitary and s real nonnegative descending.
    """
    u, s, vh = np.linalg.svd(np.asarray(m, dtype=complex))
    return u, s, vh.conj().T
