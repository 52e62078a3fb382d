"""Serially concatenated convolutional code: outer RSC, quadratic interleaver, inner RSC."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from .interleaver import InterleaverSpec, quadratic_permute, quadratic_unpermute
from .siso import DecodeAlgorithm, bcjr
from .trellis import RscCode, rsc_encode


def default_outer():
    return RscCode(feedback=0o7, feedforward=(0o5,), k_in=1)


def default_inner():
    return RscCode(feedback=0o7, feedforward=(0o5,), k_in=2)


@dataclass(frozen=True)
class SccCode:
    outer: RscCode = field(default_factory=default_outer)
    inner: RscCode = field(default_factory=default_inner)
    interleaver: InterleaverSpec = field(default_factory=InterleaverSpec)

    def __post_init__(self):
        n = self.interleaver.length
        if n % self.outer.n_out:
            raise ConfigError(
                f"interleaver length {n} not a multiple of outer n_out={self.outer.n_out}",
                "interleaver.length",
            )
        if self.message_length * self.outer.k_in <= 0 or self.message_length % self.outer.k_in:
            raise ConfigError("interleaver too short for the outer code", "interleaver.length")
        if n % self.inner.k_in:
            raise ConfigError(
                f"interleaver length {n} not a multiple of inner k_in={self.inner.k_in}",
                "interleaver.length",
            )

    @property
    def message_length(self):
        """Information bits per frame so the terminated outer codeword fills the interleaver."""
        o = self.outer
        return (self.interleaver.length // o.n_out - o.memory) * o.k_in

    @property
    def codeword_length(self):
        return self.inner.codeword_length(self.interleaver.length)

    @property
    def rate(self):
        return self.message_length / self.codeword_length

    @property
    def nominal_rate(self):
        return self.outer.rate * self.inner.rate


def scc_encode(message, code):
    message = np.asarray(message, dtype=np.uint8).reshape(-1)
    if message.size != code.message_length:
        raise ValueError(
            f"message length {message.size} != {code.message_length} for this code"
        )
    outer_cw = rsc_encode(message, code.outer)
    return rsc_encode(quadratic_permute(outer_cw, code.interleaver), code.inner)


def scc_decode(
    channel_llrs,
    code,
    alg=DecodeAlgorithm.LOG_MAP,
    iterations=8,
    message_apriori=None,
    return_history=False,
):
    """Iterative decoding of an SCC frame.

    The inner decoder sees the channel plus the interleaved outer extrinsic;
    the outer decoder sees only the deinterleaved inner extrinsic on its code
    bits. Hard decisions come from the outer a-posteriori message LLRs.

    With ``return_history=True`` a list with the decisions after every
    iteration is returned instead of the final decisions alone.
    """
    if int(iterations) < 1:
        raise ConfigError("iterations must be >= 1", "iterations")
    alg = DecodeAlgorithm.parse(alg)
    lc = np.asarray(channel_llrs, dtype=float).reshape(-1)
    if lc.size != code.codeword_length:
        raise ValueError(f"LLR length {lc.size} != codeword length {code.codeword_length}")
    ilv = code.interleaver
    to_inner = np.zeros(ilv.length)
    history = []
    for _ in range(int(iterations)):
        app_in, _, la, _ = bcjr(lc, to_inner, code.inner, alg)
        inner_ext = app_in - la
        outer_obs = quadratic_unpermute(inner_ext, ilv)
        msg_app, code_app, _, obs_clipped = bcjr(outer_obs, message_apriori, code.outer, alg)
        outer_ext = code_app - obs_clipped
        to_inner = quadratic_permute(outer_ext, ilv)
        decided = (msg_app < 0).astype(np.uint8)
        if return_history:
            history.append(decided)
    return history if return_history else decided
