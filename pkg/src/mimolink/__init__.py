"""mimolink: link-level MIMO-BICM simulation and achievable-rate analysis
for receivers operating on imperfect pilot-based channel estimates.

The receiver chain supports two per-letter decoding metrics: the
classical mismatched one (estimate plugged into the true-channel
likelihood) and the composite-channel one that averages the likelihood
over the conditional law of the channel given the estimate. Companion
modules evaluate the corresponding closed-form achievable rates, the
outage capacity they lower-bound, and Monte Carlo BER.
"""

__version__ = "0.1.0"

from .numerics import Seed, empirical_quantile, gamma0, gamma_neg_int, sample_zmcscg, svd
from .channel import (ChannelEstimate, ChannelParams, apply_channel, make_pilots,
                      ml_estimate, sample_channel, sample_estimate_marginal,
                      sample_posterior)
from .metrics import MetricEvaluator, composite_params, metric_ratio_sweep
from .rates import (DegenerateConfigError, RateConstants, RotatedEstimate,
                    eio_capacity, expected_outage_rate, expected_rate_curves,
                    lemma_expectation, mutual_info, outage_rate, rate_constants,
                    rate_improved, rate_mismatched, rotate)
from .bicm import (BerConfig, ConvCode, Constellation, Interleaver,
                   build_interleaver, conv_encode, demap_soft, make_constellation,
                   map_symbols, run_receiver, simulate_ber, siso_decode)
from .kernels import BACKEND as KERNEL_BACKEND

__all__ = [
    "__version__", "KERNEL_BACKEND",
    "Seed", "empirical_quantile", "gamma0", "gamma_neg_int", "sample_zmcscg", "svd",
    "ChannelEstimate", "ChannelParams", "apply_channel", "make_pilots",
    "ml_estimate", "sample_channel", "sample_estimate_marginal", "sample_posterior",
    "MetricEvaluator", "composite_params", "metric_ratio_sweep",
    "DegenerateConfigError", "RateConstants", "RotatedEstimate", "eio_capacity",
    "expected_outage_rate", "expected_rate_curves", "lemma_expectation",
    "mutual_info", "outage_rate", "rate_constants", "rate_improved",
    "rate_mismatched", "rotate",
    "BerConfig", "ConvCode", "Constellation", "Interleaver", "build_interleaver",
    "conv_encode", "demap_soft", "make_constellation", "map_symbols",
    "run_receiver", "simulate_ber", "siso_decode",
]
