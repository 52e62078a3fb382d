"""Recursive systematic convolutional codes and their trellis tables.

Polynomials are octal with the most significant bit as the ``D**0`` tap, so
``0o7 = 1 + D + D**2`` and ``0o13 = 1 + D**2 + D**3``. With ``k_in > 1`` the
inputs are summed (mod 2) into a single feedback register, which is how the
rate-2/3 inner code is built.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..errors import ConfigError


def parse_octal(value):
    if isinstance(value, str):
        return int(value, 8)
    return int(value)


def _taps(poly, memory):
    return [(poly >> (memory - i)) & 1 for i in range(memory + 1)]


@dataclass(frozen=True)
class Trellis:
    next_state: np.ndarray  # (S, U)
    out_bits: np.ndarray  # (S, U, n_out), 0/1
    in_bits: np.ndarray  # (U, k_in), 0/1
    tail_input: np.ndarray  # (S,) input that drives the register toward zero
    prev_state: np.ndarray  # (S, U) predecessors of each state
    prev_input: np.ndarray  # (S, U)

    @property
    def n_states(self):
        return self.next_state.shape[0]


@dataclass(frozen=True)
class RscCode:
    feedback: int = 0o7
    feedforward: tuple = (0o5,)
    k_in: int = 1

    def __post_init__(self):
        fb = parse_octal(self.feedback)
        ff = tuple(parse_octal(p) for p in np.atleast_1d(self.feedforward))
        object.__setattr__(self, "feedback", fb)
        object.__setattr__(self, "feedforward", ff)
        if fb < 3 or not fb & 1:
            raise ConfigError(
                f"feedback polynomial {fb:o} must have degree >= 1 and a D^nu tap",
                "feedback",
            )
        if not ff:
            raise ConfigError("at least one feedforward polynomial is required", "feedforward")
        for p in ff:
            if p <= 0 or p.bit_length() > self.memory + 1:
                raise ConfigError(f"feedforward {p:o} exceeds memory {self.memory}", "feedforward")
        if self.k_in < 1:
            raise ConfigError("k_in must be >= 1", "k_in")

    @property
    def memory(self):
        return parse_octal(self.feedback).bit_length() - 1

    @property
    def n_out(self):
        return self.k_in + len(self.feedforward)

    @property
    def rate(self):
        return self.k_in / self.n_out

    def codeword_length(self, n_bits):
        return (n_bits // self.k_in + self.memory) * self.n_out

    def describe(self):
        ff = ",".join(f"{p:o}" for p in self.feedforward)
        return f"RSC k={self.k_in} fb={self.feedback:o} ff=({ff})"

    @cached_property
    def trellis(self):
        nu, k = self.memory, self.k_in
        fb = _taps(self.feedback, nu)
        ffs = [_taps(p, nu) for p in self.feedforward]
        S, U = 1 << nu, 1 << k
        next_state = np.zeros((S, U), dtype=np.int64)
        out_bits = np.zeros((S, U, self.n_out), dtype=np.int8)
        in_bits = ((np.arange(U)[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.int8)
        tail = np.zeros(S, dtype=np.int64)
        for s in range(S):
            reg = [(s >> (nu - i)) & 1 for i in range(1, nu + 1)]  # w[t-1] .. w[t-nu]
            fb_sum = sum(fb[i] * reg[i - 1] for i in range(1, nu + 1)) & 1
            tail[s] = fb_sum << (k - 1)
            for u in range(U):
                w = (int(in_bits[u].sum()) + fb_sum) & 1
                taps = [w] + reg
                par = [sum(g[i] * taps[i] for i in range(nu + 1)) & 1 for g in ffs]
                next_state[s, u] = (w << (nu - 1)) | (s >> 1)
                out_bits[s, u] = list(in_bits[u]) + par
        prev_state = np.zeros((S, U), dtype=np.int64)
        prev_input = np.zeros((S, U), dtype=np.int64)
        fill = np.zeros(S, dtype=np.int64)
        for s in range(S):
            for u in range(U):
                ns = next_state[s, u]
                prev_state[ns, fill[ns]] = s
                prev_input[ns, fill[ns]] = u
                fill[ns] += 1
        if not np.all(fill == U):  # pragma: no cover - shift-register trellises are regular
            raise ConfigError("irregular trellis")
        return Trellis(next_state, out_bits, in_bits, tail, prev_state, prev_input)


def rsc_encode(bits, code):
    """Encode from the zero state and append ``memory`` terminating steps.

    Returns a 0/1 ``uint8`` array of length ``(len(bits)/k_in + memory) * n_out``,
    step-major with systematic bits first in each step.
    """
    bits = np.asarray(bits, dtype=np.int64).reshape(-1)
    k = code.k_in
    if bits.size % k:
        raise ValueError(f"input length {bits.size} not divisible by k_in={k}")
    tr = code.trellis
    inputs = bits.reshape(-1, k) @ (1 << np.arange(k - 1, -1, -1)) if bits.size else np.zeros(0, int)
    steps = inputs.size + code.memory
    out = np.empty((steps, code.n_out), dtype=np.uint8)
    s = 0
    for t in range(steps):
        u = inputs[t] if t < inputs.size else tr.tail_input[s]
        out[t] = tr.out_bits[s, u]
        s = tr.next_state[s, u]
    return out.reshape(-1)


def trace_final_state(codeword, code):
    """Walk the trellis with the systematic part of ``codeword``; return the end state."""
    tr = code.trellis
    steps = np.asarray(codeword).reshape(-1, code.n_out)
    k = code.k_in
    s = 0
    for row in steps:
        u = int(row[:k] @ (1 << np.arange(k - 1, -1, -1)))
        if not np.array_equal(tr.out_bits[s, u], row):
            raise ValueError("codeword is not a valid trellis path")
        s = int(tr.next_state[s, u])
    return s


def free_distance(code, max_len=32):
    """Minimum codeword weight over error events leaving and re-merging the zero state."""
    tr = code.trellis
    S = tr.n_states
    w_out = tr.out_bits.sum(axis=2)
    best = np.full(S, np.inf)
    # first step must leave state 0
    for u in range(1 << code.k_in):
        ns = tr.next_state[0, u]
        if ns != 0:
            best[ns] = min(best[ns], w_out[0, u])
    dfree = np.inf
    for _ in range(max_len):
        nxt = np.full(S, np.inf)
        for s in range(S):
            if not np.isfinite(best[s]) or s == 0:
                continue
            for u in range(1 << code.k_in):
                ns = tr.next_state[s, u]
                val = best[s] + w_out[s, u]
                if ns == 0:
                    dfree = min(dfree, val)
                else:
                    nxt[ns] = min(nxt[ns], val)
        best = nxt
    # parallel transitions from 0 back to 0 with nonzero input
    for u in range(1, 1 << code.k_in):
        if tr.next_state[0, u] == 0:
            dfree = min(dfree, w_out[0, u])
    return int(dfree)
