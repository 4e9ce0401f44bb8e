"""16-QAM constellations, random interleaving, and bit-to-symbol mapping.

Labels are 4-bit integers read MSB-first from the interleaved bit
stream. Two labelings are provided:

* gray: square Gray mapping, I from the first two bits and Q from the
  last two, so nearest-neighbour points differ in exactly one bit.
* set_partition: four-level binary partition of the grid in which each
  successive bit doubles the squared intra-subset minimum distance
  (2 -> 2*sqrt(2) -> 4 -> 4*sqrt(2) on the unit grid), the labeling that
  rewards iterative demapping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..numerics import Seed

__all__ = [
    "Constellation",
    "Interleaver",
    "make_constellation",
    "build_interleaver",
    "map_symbols",
    "hard_demap_bits",
    "compound_candidates",
    "LABELINGS",
]

LABELINGS = ("gray", "set_partition")

# (I, Q) on the +-1/+-3 grid, indexed by the 4-bit label value.
_GRAY_TABLE = [
    (-3, -3), (-3, -1), (-3, +3), (-3, +1),
    (-1, -3), (-1, -1), (-1, +3), (-1, +1),
    (+3, -3), (+3, -1), (+3, +3), (+3, +1),
    (+1, -3), (+1, -1), (+1, +3), (+1, +1),
]

# First bit picks a checkerboard half (min distance 2*sqrt(2)), second a
# 4-point spacing-4 subgrid, third its diagonal pair (4*sqrt(2)), last
# the point.
_SET_PARTITION_TABLE = [
    (-3, -3), (+1, +1), (+1, -3), (-3, +1),
    (-1, -1), (+3, +3), (+3, -1), (-1, +3),
    (-1, -3), (+3, +1), (+3, -3), (-1, +1),
    (-3, -1), (+1, +3), (+1, -1), (-3, +3),
]

# 4-point desk constellation for oracle-scale checks; the quadrant
# mapping is Gray by construction.
_QPSK_TABLE = [(-1, -1), (-1, +1), (+1, -1), (+1, +1)]

_TABLES = {
    (16, "gray"): _GRAY_TABLE,
    (16, "set_partition"): _SET_PARTITION_TABLE,
    (4, "gray"): _QPSK_TABLE,
}


@dataclass(frozen=True)
class Constellation:
    """A labeled constellation normalized to a given average energy."""

    labeling: str
    points: np.ndarray  # (order,) complex, indexed by label value
    avg_power: float

    @property
    def order(self) -> int:
        return self.points.size

    @property
    def bits_per_symbol(self) -> int:
        return int(round(math.log2(self.order)))


def make_constellation(labeling: str, avg_power: float = 1.0,
                       order: int = 16) -> Constellation:
    """QAM constellation with the requested labeling and E|point|^2 = avg_power.

    order 16 is the modulation of the transmission chain; order 4 exists
    for desk-scale brute-force checks (gray only).
    """
    if (order, labeling) not in _TABLES:
        raise ValueError(f"unsupported constellation: order={order}, "
                         f"labeling={labeling!r} (16-QAM takes {LABELINGS})")
    if avg_power <= 0:
        raise ValueError("avg_power must be positive")
    table = np.array(_TABLES[(order, labeling)], dtype=float)
    raw = table[:, 0] + 1j * table[:, 1]
    points = raw * math.sqrt(avg_power / float(np.mean(np.abs(raw) ** 2)))
    return Constellation(labeling=labeling, points=points, avg_power=avg_power)


@dataclass(frozen=True)
class Interleaver:
    """Bit permutation over a whole frame: interleaved[i] = coded[perm[i]]."""

    perm: np.ndarray

    @property
    def size(self) -> int:
        return self.perm.size

    def interleave(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[self.perm]

    def deinterleave(self, x: np.ndarray) -> np.ndarray:
        out = np.empty_like(np.asarray(x))
        out[self.perm] = x
        return out


def build_interleaver(size: int, seed: Seed) -> Interleaver:
    """Uniformly random permutation drawn from the seeded stream."""
    if size <= 0:
        raise ValueError("interleaver size must be positive")
    return Interleaver(perm=seed.generator().permutation(size))


def map_symbols(bits, constellation: Constellation, n_tx: int) -> np.ndarray:
    """Group bits into labels and labels into compound symbols.

    bits length must divide into B * n_tx; returns (L, n_tx) complex with
    antenna 0 taking the first B bits of each group (MSB-first labels).
    """
    bits = np.asarray(bits, dtype=np.uint8)
    b = constellation.bits_per_symbol
    block = b * n_tx
    if bits.size % block != 0:
        raise ValueError(f"bit count {bits.size} not divisible by B*n_tx = {block}")
    weights = 1 << np.arange(b - 1, -1, -1)
    labels = bits.reshape(-1, b) @ weights
    return constellation.points[labels].reshape(-1, n_tx)


def hard_demap_bits(symbols, constellation: Constellation) -> np.ndarray:
    """Nearest-point hard decisions back to the bit stream (test utility)."""
    pts = np.asarray(symbols).reshape(-1)
    idx = np.abs(pts[:, None] - constellation.points[None, :]).argmin(axis=1)
    b = constellation.bits_per_symbol
    shifts = np.arange(b - 1, -1, -1)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)


@lru_cache(maxsize=16)
def _candidates_cached(labeling: str, avg_power: float, order: int, n_tx: int):
    const = make_constellation(labeling, avg_power, order)
    b = const.bits_per_symbol
    nb = b * n_tx
    n_cand = 1 << nb
    idx = np.arange(n_cand)
    shifts = np.arange(nb - 1, -1, -1)
    bit_table = ((idx[:, None] >> shifts) & 1).astype(np.uint8)
    labels = np.stack([(idx >> (b * (n_tx - 1 - a))) & (const.order - 1)
                       for a in range(n_tx)], axis=1)
    symbols = const.points[labels]
    return symbols, bit_table


def compound_candidates(constellation: Constellation, n_tx: int):
    """All 2^(B*n_tx) candidate compound symbols and their bit patterns.

    Candidate c carries the bits of c MSB-first; antenna a maps bits
    [a*B, (a+1)*B), matching map_symbols. Returns (symbols (C, n_tx),
    bit_table (C, B*n_tx) uint8).
    """
    return _candidates_cached(constellation.labeling, constellation.avg_power,
                              constellation.order, n_tx)
