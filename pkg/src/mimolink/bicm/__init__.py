"""MIMO-BICM transmitter chain and iterative receiver."""

from .code import ConvCode, Trellis, conv_encode, siso_decode
from .mapping import (Constellation, Interleaver, build_interleaver,
                      compound_candidates, hard_demap_bits, make_constellation,
                      map_symbols, LABELINGS)
from .receiver import (BerConfig, BerPoint, ReceiverOutput, demap_soft,
                       ebn0_db_from_snr_db, run_receiver, simulate_ber,
                       wilson_interval)

__all__ = [
    "ConvCode", "Trellis", "conv_encode", "siso_decode",
    "Constellation", "Interleaver", "build_interleaver", "compound_candidates",
    "hard_demap_bits", "make_constellation", "map_symbols", "LABELINGS",
    "BerConfig", "BerPoint", "ReceiverOutput", "demap_soft",
    "ebn0_db_from_snr_db", "run_receiver", "simulate_ber", "wilson_interval",
]
