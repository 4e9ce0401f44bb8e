"""Iterative MIMO-BICM receiver and Monte Carlo BER measurement.

The receiver alternates a soft symbol-to-bit demapper (pluggable
decoding metric) with a SISO trellis decoder, exchanging extrinsic
probabilities. Frames are independent given their derived seeds, so BER
sweeps parallelize over frames with bit-exact reproducibility regardless
of worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..channel import ChannelParams, make_pilots
from ..metrics import MetricEvaluator
from ..numerics import Seed, _zmcscg
from .code import ConvCode, conv_encode, siso_decode
from .mapping import (Constellation, Interleaver, build_interleaver,
                      compound_candidates, make_constellation, map_symbols)

__all__ = [
    "BerConfig",
    "BerPoint",
    "ReceiverOutput",
    "demap_soft",
    "run_receiver",
    "simulate_ber",
    "wilson_interval",
    "ebn0_db_from_snr_db",
]

# feedback floor: keeps exchanged extrinsics away from exact 0/1 so the
# exponential-domain products never collapse to all-zero rows
_PROB_FLOOR = 1e-12


def demap_soft(y, evaluator: MetricEvaluator, priors, constellation: Constellation,
               n_tx: int, max_log: bool = False) -> np.ndarray:
    """Extrinsic probabilities for the bits of one compound symbol.

    priors: (B*n_tx, 2) decoder feedback [P(0), P(1)] per bit (use 0.5
    everywhere on the first iteration). The returned row excludes each
    bit's own prior and is normalized pairwise.
    """
    y = np.asarray(y, dtype=complex)
    priors = np.asarray(priors, dtype=np.float64)
    symbols, bit_table = compound_candidates(constellation, n_tx)
    nb = bit_table.shape[1]
    if priors.shape != (nb, 2):
        raise ValueError(f"priors must have shape ({nb}, 2)")
    if np.any(priors < 0):
        raise ValueError("priors must be nonnegative")
    proj, inv_var, log_norm = evaluator.candidate_tables(symbols)
    quad = np.abs(y[:, None] - proj) ** 2
    scores = log_norm + quad.sum(axis=0) * inv_var
    weights = np.exp(-(scores - scores.min()))
    ext = kernels.demap_extrinsic(weights[None, :], bit_table, priors[None], max_log)
    return ext[0]


@dataclass
class ReceiverOutput:
    decisions: np.ndarray            # (n_iterations, n_info) uint8
    ber: np.ndarray | None = None    # (n_iterations,) when info_bits known


def _frame_weights(y, h_dec, kind, noise_var, err_var, shrinkage, symbols):
    """Per-candidate exp(-metric) weights for every symbol of a frame.

    Scores are formed in the log domain and exponentiated after a
    per-symbol max subtraction, since the quadratic term can exceed the
    double exponent range at low SNR.
    """
    if kind == "mismatched":
        gain = h_dec
        energy = None
        inv_var = 1.0 / noise_var
        log_norm = 0.0
    elif kind == "improved":
        gain = shrinkage * h_dec
        energy = np.sum(np.abs(symbols) ** 2, axis=1)
        var = noise_var + shrinkage * err_var * energy
        inv_var = 1.0 / var
        log_norm = h_dec.shape[1] * np.log(var)
    else:
        raise ValueError(f"unknown metric kind {kind!r}")
    proj = np.einsum("lrt,ct->lrc", gain, symbols)
    quad = np.abs(y[:, :, None] - proj) ** 2
    scores = log_norm + quad.sum(axis=1) * inv_var
    scores -= scores.min(axis=1, keepdims=True)
    return np.exp(-scores)


def run_receiver(y, h_dec, kind: str, noise_var: float, constellation: Constellation,
                 interleaver: Interleaver, n_iterations: int,
                 err_var: float = 0.0, shrinkage: float = 1.0,
                 code: ConvCode = ConvCode(), info_bits=None,
                 max_log: bool = False) -> ReceiverOutput:
    """Iterative demap/decode loop over one frame of observations.

    y       (L, n_rx) received vectors
    h_dec   (L, n_rx, n_tx) channel matrices the decoder uses (estimates,
            or the truth for a genie reference)
    kind    "mismatched" or "improved"; the improved kind additionally
            needs err_var and shrinkage

    Iteration 1 uses uniform priors (plain non-iterative BICM decoding);
    each later iteration feeds the decoder extrinsics back to the
    demapper. Decisions are recorded after every iteration.
    """
    if n_iterations < 1:
        raise ValueError("n_iterations must be >= 1")
    y = np.asarray(y, dtype=complex)
    h_dec = np.asarray(h_dec, dtype=complex)
    n_sym, n_rx, n_tx = h_dec.shape
    symbols, bit_table = compound_candidates(constellation, n_tx)
    nb = bit_table.shape[1]
    if interleaver.size != n_sym * nb:
        raise ValueError("interleaver size does not match the frame bit count")
    n_info = interleaver.size // 2 - code.memory

    weights = _frame_weights(y, h_dec, kind, noise_var, err_var, shrinkage, symbols)
    priors = np.full((n_sym, nb, 2), 0.5)
    decisions = np.zeros((n_iterations, n_info), dtype=np.uint8)
    for it in range(n_iterations):
        ext = kernels.demap_extrinsic(weights, bit_table, priors, max_log)
        coded_probs = interleaver.deinterleave(ext.reshape(-1, 2))
        code_ext, info_app = siso_decode(coded_probs, code)
        decisions[it] = (info_app[:, 1] > info_app[:, 0]).astype(np.uint8)
        feedback = interleaver.interleave(code_ext)
        feedback = np.clip(feedback, _PROB_FLOOR, None)
        feedback /= feedback.sum(axis=1, keepdims=True)
        priors = feedback.reshape(n_sym, nb, 2)

    ber = None
    if info_bits is not None:
        info_bits = np.asarray(info_bits, dtype=np.uint8)
        ber = (decisions != info_bits[None, :]).mean(axis=1)
    return ReceiverOutput(decisions=decisions, ber=ber)


@dataclass(frozen=True)
class BerConfig:
    """One BER sweep: antennas, training, labeling, SNR grid, trial budget."""

    n_tx: int = 2
    n_rx: int = 2
    n_pilots: int = 2
    labeling: str = "gray"
    snr_db: tuple[float, ...] = (10.0,)
    metrics: tuple[str, ...] = ("mismatched", "improved", "perfect_csi")
    frames: int = 1000
    iterations: int = 4
    frame_symbols: int = 50
    channel_var: float = 1.0
    data_power: float = 1.0
    seed: int = 0
    workers: int = 1
    max_log: bool = False
    fading: str = "per_symbol"  # "per_frame" keeps one H for a whole frame

    def __post_init__(self):
        if self.fading not in ("per_symbol", "per_frame"):
            raise ValueError("fading must be per_symbol or per_frame")
        for m in self.metrics:
            if m not in ("mismatched", "improved", "perfect_csi"):
                raise ValueError(f"unknown metric series {m!r}")
        if self.frames < 1 or self.iterations < 1 or self.frame_symbols < 1:
            raise ValueError("frames, iterations and frame_symbols must be >= 1")

    @property
    def bits_per_label(self) -> int:
        return 4  # 16-QAM

    @property
    def n_coded_bits(self) -> int:
        return self.frame_symbols * self.n_tx * self.bits_per_label

    def n_info_bits(self, code: ConvCode = ConvCode()) -> int:
        return self.n_coded_bits // 2 - code.memory


@dataclass(frozen=True)
class BerPoint:
    snr_db: float
    eb_n0_db: float
    series: str
    ber: float
    ci_low: float
    ci_high: float
    n_bits: int
    errors: int


def ebn0_db_from_snr_db(snr_db: float, n_tx: int, bits_per_label: int = 4,
                        code_rate: float = 0.5) -> float:
    """SNR is total transmit power over per-antenna noise: P*M_T/sigma_Z^2.

    Eb/N0 = SNR / (R_c * B * M_T)."""
    return snr_db - 10.0 * math.log10(code_rate * bits_per_label * n_tx)


def wilson_interval(errors: int, n: int, z: float = 1.959963984540054):
    """95% Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("n must be positive")
    p = errors / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


def _params_for(cfg: BerConfig, snr_db: float) -> ChannelParams:
    noise_var = cfg.data_power * cfg.n_tx / (10.0 ** (snr_db / 10.0))
    # pilot power equals data power throughout
    return ChannelParams(cfg.n_tx, cfg.n_rx, cfg.channel_var, noise_var,
                         cfg.data_power, cfg.data_power, cfg.n_pilots)


def _frame_errors(args):
    """Bit errors of one frame for every requested metric and iteration."""
    cfg, i_snr, frame_idx = args
    code = ConvCode()
    snr_db = cfg.snr_db[i_snr]
    params = _params_for(cfg, snr_db)
    const = make_constellation(cfg.labeling, cfg.data_power)
    seed = Seed(cfg.seed).child(i_snr, frame_idx)

    n_info = cfg.n_info_bits(code)
    info_bits = seed.child(0).generator().integers(0, 2, n_info, dtype=np.uint8)
    interleaver = build_interleaver(cfg.n_coded_bits, seed.child(1))
    coded = conv_encode(info_bits, code)
    x = map_symbols(interleaver.interleave(coded), const, cfg.n_tx)

    rng = seed.child(2).generator()
    n_sym = cfg.frame_symbols
    h = _zmcscg(rng, (n_sym, cfg.n_rx, cfg.n_tx), cfg.channel_var)
    if cfg.fading == "per_frame":
        h = np.broadcast_to(h[0], h.shape).copy()
    pilots = make_pilots(params)
    z_train = _zmcscg(rng, (n_sym, cfg.n_rx, params.n_pilots), params.noise_var)
    y_train = h @ pilots[None, :, :] + z_train
    h_hat = y_train @ pilots.conj().T / (params.n_pilots * params.pilot_power)
    z = _zmcscg(rng, (n_sym, cfg.n_rx), params.noise_var)
    y = np.einsum("lrt,lt->lr", h, x) + z

    errors = np.zeros((len(cfg.metrics), cfg.iterations), dtype=np.int64)
    for i_m, metric in enumerate(cfg.metrics):
        if metric == "perfect_csi":
            out = run_receiver(y, h, "mismatched", params.noise_var, const,
                               interleaver, cfg.iterations, code=code,
                               info_bits=info_bits, max_log=cfg.max_log)
        else:
            out = run_receiver(y, h_hat, metric, params.noise_var, const,
                               interleaver, cfg.iterations,
                               err_var=params.err_var, shrinkage=params.shrinkage,
                               code=code, info_bits=info_bits, max_log=cfg.max_log)
        errors[i_m] = (out.decisions != info_bits[None, :]).sum(axis=1)
    return errors


def simulate_ber(cfg: BerConfig) -> list[BerPoint]:
    """Monte Carlo BER for every (snr, metric, iteration) of the config.

    Deterministic under the config seed: every frame derives its own
    stream from (seed, snr index, frame index), and integer error counts
    are reduced by summation, so worker count never changes the result.
    """
    if not cfg.snr_db:
        raise ValueError("empty SNR grid")
    code = ConvCode()
    n_info = cfg.n_info_bits(code)
    points: list[BerPoint] = []
    for i_snr, snr_db in enumerate(cfg.snr_db):
        tasks = [(cfg, i_snr, f) for f in range(cfg.frames)]
        if cfg.workers > 1:
            chunk = max(1, cfg.frames // (cfg.workers * 8))
            with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
                results = list(ex.map(_frame_errors, tasks, chunksize=chunk))
        else:
            results = [_frame_errors(t) for t in tasks]
        errors = np.sum(results, axis=0)  # (n_metrics, n_iterations)
        n_bits = cfg.frames * n_info
        ebn0 = ebn0_db_from_snr_db(snr_db, cfg.n_tx, cfg.bits_per_label, code.rate)
        for i_m, metric in enumerate(cfg.metrics):
            for it in range(cfg.iterations):
                k = int(errors[i_m, it])
                lo, hi = wilson_interval(k, n_bits)
                points.append(BerPoint(
                    snr_db=snr_db, eb_n0_db=ebn0,
                    series=f"{metric}_iter{it + 1}",
                    ber=k / n_bits, ci_low=lo, ci_high=hi,
                    n_bits=n_bits, errors=k))
    return points
