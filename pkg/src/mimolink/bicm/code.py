"""Rate-1/2 feedforward convolutional code and its SISO trellis decoder.

Default code is the 4-state non-recursive non-systematic code with octal
generators (5, 7). Frames are terminated: two zero tail bits drive the
register back to state zero, so the forward and backward trellis passes
both pin state 0 and per-bit posteriors are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .. import kernels

__all__ = ["ConvCode", "Trellis", "conv_encode", "siso_decode"]


@dataclass(frozen=True)
class ConvCode:
    """Feedforward binary convolutional code, one input / two output bits."""

    generators: tuple[int, int] = (0o5, 0o7)
    constraint_length: int = 3

    @property
    def memory(self) -> int:
        return self.constraint_length - 1

    @property
    def n_states(self) -> int:
        return 1 << self.memory

    @property
    def rate(self) -> float:
        return 0.5

    def trellis(self) -> "Trellis":
        return _build_trellis(self.generators, self.constraint_length)


@dataclass(frozen=True)
class Trellis:
    """State-transition tables; state = shift register, newest bit first.

    next_state[s, b]   state after input b
    out_bits[s, b, j]  j-th coded bit emitted on that branch
    prev_state[t, i]   the two (state, input) pairs leading into state t
    prev_input[t, i]
    """

    next_state: np.ndarray
    out_bits: np.ndarray
    prev_state: np.ndarray
    prev_input: np.ndarray


def _parity(v: int) -> int:
    return bin(v).count("1") & 1


@lru_cache(maxsize=8)
def _build_trellis(generators: tuple[int, int], constraint_length: int) -> Trellis:
    mem = constraint_length - 1
    n_states = 1 << mem
    n_out = len(generators)
    nxt = np.zeros((n_states, 2), dtype=np.int32)
    out = np.zeros((n_states, 2, n_out), dtype=np.uint8)
    for s in range(n_states):
        for b in range(2):
            reg = (b << mem) | s
            nxt[s, b] = (b << (mem - 1)) | (s >> 1) if mem > 0 else 0
            for j, g in enumerate(generators):
                out[s, b, j] = _parity(g & reg)
    prev_s = np.zeros((n_states, 2), dtype=np.int32)
    prev_b = np.zeros((n_states, 2), dtype=np.int32)
    fill = np.zeros(n_states, dtype=int)
    for s in range(n_states):
        for b in range(2):
            t = nxt[s, b]
            prev_s[t, fill[t]] = s
            prev_b[t, fill[t]] = b
            fill[t] += 1
    assert np.all(fill == 2), "trellis is not 2-regular"
    return Trellis(nxt, out, prev_s, prev_b)


def conv_encode(bits, code: ConvCode = ConvCode()) -> np.ndarray:
    """Encode and terminate: output length 2 * (len(bits) + memory).

    The appended zero tail returns the register to state 0, which the
    decoder exploits by pinning both trellis ends.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 1:
        raise ValueError("bits must be a 1-D array")
    mem = code.memory
    kc = code.constraint_length
    padded = np.concatenate([bits, np.zeros(mem, dtype=np.uint8)])
    n = padded.size
    # full[i + mem] == padded[i]; taps reach back into the zero initial state
    full = np.concatenate([np.zeros(mem, dtype=np.uint8), padded])
    out = np.zeros((n, len(code.generators)), dtype=np.uint8)
    for j, g in enumerate(code.generators):
        acc = np.zeros(n, dtype=np.uint8)
        for q in range(kc):
            if (g >> q) & 1:
                delay = kc - 1 - q
                acc ^= full[mem - delay:mem - delay + n]
        out[:, j] = acc
    return out.reshape(-1)


def siso_decode(bit_probs, code: ConvCode = ConvCode()):
    """Forward-backward pass over the terminated trellis.

    bit_probs: (n_coded, 2) per-coded-bit probabilities [P(0), P(1)] in
    transmission order. Returns (extrinsic, info_app):

    extrinsic  (n_coded, 2), posterior of each coded bit with that bit's
               own input probability excluded (for feedback to a demapper)
    info_app   (n_info, 2), full posterior of each information bit; the
               per-bit MAP decision is its argmax
    """
    bit_probs = np.ascontiguousarray(bit_probs, dtype=np.float64)
    if bit_probs.ndim != 2 or bit_probs.shape[1] != 2:
        raise ValueError("bit_probs must have shape (n_coded, 2)")
    if bit_probs.shape[0] % 2 != 0:
        raise ValueError("coded bit count must be even for a rate-1/2 code")
    n_steps = bit_probs.shape[0] // 2
    mem = code.memory
    if n_steps <= mem:
        raise ValueError("frame shorter than the termination tail")
    tr = code.trellis()
    bm = bit_probs.reshape(n_steps, 2, 2)
    ext, app1 = kernels.bcjr_pass(bm, tr.next_state, tr.out_bits)
    info_app = np.stack([1.0 - app1[:n_steps - mem], app1[:n_steps - mem]], axis=1)
    return ext.reshape(-1, 2), info_app
