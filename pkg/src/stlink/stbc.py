"""Orthogonal space-time block codes (Alamouti G2, half-rate G3) and ML combining.

Blocks are complex arrays of shape ``(..., slots, n_tx)``; entry ``[t, i]`` is
what antenna ``i`` sends in slot ``t``. Channel matrices are ``(..., n_rx,
n_tx)`` with ``H[j, i]`` the gain from transmit antenna ``i`` to receive
antenna ``j``, so a received block is ``C @ H.T`` plus noise.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DegenerateChannelError
from .modem import hard_labels

# (sign, symbol index, conjugate) per slot and antenna
_TABLES = {
    "none": [[(1, 0, False)]],
    "g2": [
        [(1, 0, False), (1, 1, False)],
        [(-1, 1, True), (1, 0, True)],
    ],
    "g3": [
        [(1, 0, False), (1, 1, False), (1, 2, False)],
        [(-1, 1, False), (1, 0, False), (-1, 3, False)],
        [(-1, 2, False), (1, 3, False), (1, 0, False)],
        [(-1, 3, False), (-1, 2, False), (1, 1, False)],
        [(1, 0, True), (1, 1, True), (1, 2, True)],
        [(-1, 1, True), (1, 0, True), (-1, 3, True)],
        [(-1, 2, True), (1, 3, True), (1, 0, True)],
        [(-1, 3, True), (-1, 2, True), (1, 1, True)],
    ],
}
_GAIN = {"none": 1.0, "g2": 1.0, "g3": 2.0}
NORMALIZATIONS = ("per-antenna", "total")


@dataclass(frozen=True)
class StbcScheme:
    name: str = "g2"
    normalization: str = "per-antenna"
    direct: np.ndarray = field(init=False, repr=False, compare=False)
    conj: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        key = str(self.name).lower()
        if key not in _TABLES:
            raise ConfigError(f"unknown STBC scheme {self.name!r}", "stbc.scheme")
        if self.normalization not in NORMALIZATIONS:
            raise ConfigError(f"unknown normalization {self.normalization!r}", "stbc.normalization")
        table = _TABLES[key]
        slots, n_tx = len(table), len(table[0])
        spb = 1 + max(idx for row in table for _, idx, _ in row)
        direct = np.zeros((spb, slots, n_tx))
        conj = np.zeros((spb, slots, n_tx))
        for t, row in enumerate(table):
            for i, (sign, idx, cj) in enumerate(row):
                (conj if cj else direct)[idx, t, i] = sign
        direct.setflags(write=False)
        conj.setflags(write=False)
        object.__setattr__(self, "name", key)
        object.__setattr__(self, "direct", direct)
        object.__setattr__(self, "conj", conj)

    @property
    def n_tx(self):
        return self.direct.shape[2]

    @property
    def slots(self):
        return self.direct.shape[1]

    @property
    def symbols_per_block(self):
        return self.direct.shape[0]

    @property
    def rate(self):
        return self.symbols_per_block / self.slots

    @property
    def amplitude(self):
        """Per-antenna amplitude scale applied at transmission."""
        return 1.0 if self.normalization == "per-antenna" else 1.0 / np.sqrt(self.n_tx)

    @property
    def orthogonality_factor(self):
        """``C^H C = factor * sum|x|^2 * I`` before amplitude scaling."""
        return _GAIN[self.name]


G2 = StbcScheme("g2")
G3 = StbcScheme("g3")
SISO = StbcScheme("none")


@dataclass(frozen=True)
class ReceivedFrame:
    r: np.ndarray  # (..., slots, n_rx)
    noise_variance: float  # total complex variance per sample


class CombinedStats(NamedTuple):
    statistic: np.ndarray  # (..., symbols_per_block), equals gain * x + noise
    gain: np.ndarray  # (...,)


def stbc_encode(symbols, scheme):
    """Map ``symbols_per_block`` symbols (or a batch of them) to a transmission block."""
    x = np.asarray(symbols, dtype=complex)
    if x.ndim == 0 or x.shape[-1] != scheme.symbols_per_block:
        raise ValueError(
            f"{scheme.name} needs {scheme.symbols_per_block} symbols per block, got shape {x.shape}"
        )
    c = np.einsum("...k,kti->...ti", x, scheme.direct) + np.einsum(
        "...k,kti->...ti", x.conj(), scheme.conj
    )
    return c * scheme.amplitude


def stbc_encode_stream(symbols, scheme):
    x = np.asarray(symbols, dtype=complex).reshape(-1)
    if x.size % scheme.symbols_per_block:
        raise ValueError("symbol count is not a whole number of blocks")
    return stbc_encode(x.reshape(-1, scheme.symbols_per_block), scheme)


def _check_shapes(block, H):
    if block.shape[-1] != H.shape[-1]:
        raise ValueError(f"block has {block.shape[-1]} antennas, channel expects {H.shape[-1]}")


def apply_channel(block, H, snr, rng=None, noiseless=False, reference_power=None):
    """Pass blocks through a quasi-static flat channel and add receiver noise.

    Noise is circular complex Gaussian with total variance
    ``reference_power / snr`` per receive sample, i.e. ``reference_power /
    (2 snr)`` per real dimension; ``reference_power`` defaults to ``n_tx``.
    """
    block = np.asarray(block, dtype=complex)
    H = np.asarray(H, dtype=complex)
    _check_shapes(block, H)
    if not snr > 0:
        raise ValueError("snr must be positive")
    n_tx = block.shape[-1]
    nv = (n_tx if reference_power is None else reference_power) / snr
    r = np.einsum("...ti,...ji->...tj", block, H)
    if not noiseless:
        if rng is None:
            raise ValueError("rng is required unless noiseless=True")
        r = r + np.sqrt(nv / 2.0) * (
            rng.standard_normal(r.shape) + 1j * rng.standard_normal(r.shape)
        )
    return ReceivedFrame(r, nv)


def ml_metric(frame, H, candidate):
    """Sum over slots and receive antennas of ``|r - C H^T|^2``."""
    r = frame.r if isinstance(frame, ReceivedFrame) else np.asarray(frame)
    candidate = np.asarray(candidate, dtype=complex)
    H = np.asarray(H, dtype=complex)
    _check_shapes(candidate, H)
    model = np.einsum("...ti,...ji->...tj", candidate, H)
    if model.shape[-2:] != r.shape[-2:]:
        raise ValueError(f"received shape {r.shape} does not match model {model.shape}")
    return np.sum(np.abs(r - model) ** 2, axis=(-2, -1))


def combine(frame, H, scheme):
    """Linear orthogonal-design combining.

    Each symbol is split into its real and imaginary parts; their noiseless
    responses are orthogonal with equal energy, so projecting the received
    block onto them yields ``gain * x_k + noise`` independently per symbol.
    """
    r = frame.r if isinstance(frame, ReceivedFrame) else np.asarray(frame)
    H = np.asarray(H, dtype=complex)
    if H.shape[-1] != scheme.n_tx:
        raise ValueError(f"channel has {H.shape[-1]} tx antennas, {scheme.name} needs {scheme.n_tx}")
    amp = scheme.amplitude
    resp_re = amp * np.einsum("kti,...ji->...ktj", scheme.direct + scheme.conj, H)
    resp_im = 1j * amp * np.einsum("kti,...ji->...ktj", scheme.direct - scheme.conj, H)
    stat = np.einsum("...ktj,...tj->...k", resp_re.conj(), r).real + 1j * np.einsum(
        "...ktj,...tj->...k", resp_im.conj(), r
    ).real
    gain = scheme.orthogonality_factor * amp**2 * np.sum(np.abs(H) ** 2, axis=(-2, -1))
    return CombinedStats(stat, gain)


def stbc_detect(frame, H, scheme, c):
    """Combine then slice each symbol independently (ML for orthogonal designs).

    Returns ``(symbols, CombinedStats)``; the post-combining noise on
    ``statistic / gain`` has total complex variance ``noise_variance / gain``.
    """
    stats = combine(frame, H, scheme)
    if np.any(stats.gain <= 0):
        raise DegenerateChannelError("channel matrix has zero energy")
    z = stats.statistic / np.asarray(stats.gain)[..., None]
    labels = hard_labels(z, c).reshape(z.shape)
    return c.points[labels], stats
