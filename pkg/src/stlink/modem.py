"""Square M-QAM with gray labelling, hard/soft demapping and reference BER curves.

Labels are integers whose most significant bit is transmitted first. For
``M = 4**m`` the upper ``m`` label bits select the in-phase level and the lower
``m`` bits the quadrature level, each rail gray coded on its own. ``M = 2`` is
accepted as the one-rail (BPSK) special case.
"""

from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.special import erfc, logsumexp

_CHUNK = 1 << 16


def db2lin(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def ebn0_to_esn0(ebn0_db, bits_per_symbol, code_rate=1.0):
    """Linear Es/N0 for a given Eb/N0 in dB.

    ``code_rate`` is the overall rate seen by the modulator, i.e. any space-time
    code rate is folded in by the caller.
    """
    return db2lin(ebn0_db) * bits_per_symbol * code_rate


def _gray_pam(nbits):
    """Amplitude for each gray label on one rail: levels -(L-1), ..., L-1."""
    n = 1 << nbits
    idx = np.arange(n)
    levels = 2.0 * idx - (n - 1)
    out = np.empty(n)
    out[idx ^ (idx >> 1)] = levels
    return out


@dataclass(frozen=True)
class Constellation:
    order: int = 16
    points: np.ndarray = field(init=False, repr=False, compare=False)
    raw_points: np.ndarray = field(init=False, repr=False, compare=False)
    bit_table: np.ndarray = field(init=False, repr=False, compare=False)
    norm_factor: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m = int(self.order)
        if m == 2:
            raw = _gray_pam(1).astype(complex)
        else:
            half = int(round(np.log2(m))) // 2
            if m < 4 or 4**half != m:
                raise ValueError(f"QAM order must be 2 or a power of 4, got {self.order}")
            pam = _gray_pam(half)
            labels = np.arange(m)
            raw = pam[labels >> half] + 1j * pam[labels & ((1 << half) - 1)]
        k = int(round(np.log2(m)))
        nf = 1.0 / np.sqrt(np.mean(np.abs(raw) ** 2))
        bits = (np.arange(m)[:, None] >> np.arange(k - 1, -1, -1)[None, :]) & 1
        object.__setattr__(self, "order", m)
        object.__setattr__(self, "raw_points", raw)
        object.__setattr__(self, "points", raw * nf)
        object.__setattr__(self, "bit_table", bits.astype(np.uint8))
        object.__setattr__(self, "norm_factor", float(nf))
        for arr in (raw, self.points, self.bit_table):
            arr.setflags(write=False)

    @property
    def bits_per_symbol(self):
        return self.bit_table.shape[1]

    def labels_to_bits(self, labels):
        return self.bit_table[np.asarray(labels, dtype=np.int64)].reshape(-1)

    def bits_to_labels(self, bits):
        k = self.bits_per_symbol
        b = np.asarray(bits, dtype=np.int64).reshape(-1, k)
        return b @ (1 << np.arange(k - 1, -1, -1))


@dataclass(frozen=True)
class LlrFrame:
    """Per-bit LLRs, positive meaning bit 0 is more likely."""

    llr: np.ndarray
    noise_variance: object

    def __len__(self):
        return len(self.llr)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.llr, dtype=dtype)


def qam_modulate(bits, c):
    bits = np.asarray(bits)
    k = c.bits_per_symbol
    if bits.size % k:
        raise ValueError(f"bit count {bits.size} is not a multiple of {k}")
    if bits.size == 0:
        return np.zeros(0, dtype=complex)
    return c.points[c.bits_to_labels(bits)]


def _sq_dist(y, points):
    return np.abs(y[:, None] - points[None, :]) ** 2


def hard_labels(symbols, c):
    """Nearest-point label per symbol; exact ties go to the smaller label."""
    y = np.asarray(symbols, dtype=complex).reshape(-1)
    out = np.empty(y.size, dtype=np.int64)
    for lo in range(0, y.size, _CHUNK):
        d = _sq_dist(y[lo : lo + _CHUNK], c.points)
        dmin = d.min(axis=1, keepdims=True)
        # rounding in the normalized grid turns geometric ties into 1-ulp races
        near = d <= dmin + 1e-12 * (1.0 + dmin)
        out[lo : lo + _CHUNK] = np.argmax(near, axis=1)
    return out


def qam_demod_hard(symbols, c):
    return c.labels_to_bits(hard_labels(symbols, c))


def qam_demod_llr(symbols, noise_variance, c, exact=False):
    """Soft demapping to bit LLRs.

    Parameters
    ----------
    symbols : array_like of complex
    noise_variance : float or array_like
        Total complex noise variance, either scalar or one value per symbol.
    c : Constellation
    exact : bool
        Use the full log-sum-exp instead of the max-log approximation.

    Returns
    -------
    LlrFrame
    """
    y = np.asarray(symbols, dtype=complex).reshape(-1)
    nv = np.broadcast_to(np.asarray(noise_variance, dtype=float), y.shape)
    if np.any(~(nv > 0)):
        raise ValueError("noise_variance must be positive")
    k = c.bits_per_symbol
    out = np.empty((y.size, k))
    ones = c.bit_table.astype(bool)
    for lo in range(0, y.size, _CHUNK):
        sl = slice(lo, lo + _CHUNK)
        metric = _sq_dist(y[sl], c.points) / nv[sl, None]
        for j in range(k):
            m1 = metric[:, ones[:, j]]
            m0 = metric[:, ~ones[:, j]]
            if exact:
                out[sl, j] = logsumexp(-m0, axis=1) - logsumexp(-m1, axis=1)
            else:
                out[sl, j] = m1.min(axis=1) - m0.min(axis=1)
    return LlrFrame(out.reshape(-1), noise_variance)


def _qfunc(x):
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def _ber_coefficients(c):
    """(A, a) such that BER ~= A * Q(sqrt(a * Eb/N0))."""
    m, k = c.order, c.bits_per_symbol
    if m == 2:
        return 1.0, 2.0
    return (4.0 / k) * (1.0 - 1.0 / np.sqrt(m)), 3.0 * k / (m - 1)


def uncoded_ber_awgn(c, ebn0_db):
    """Nearest-neighbour gray M-QAM bit error rate over AWGN."""
    amp, a = _ber_coefficients(c)
    val = amp * _qfunc(np.sqrt(a * db2lin(ebn0_db)))
    return float(val) if np.ndim(val) == 0 else val


def uncoded_ber_rayleigh(c, ebn0_db, diversity_order=1):
    """Average gray M-QAM BER over iid Rayleigh branches with maximal-ratio combining.

    ``ebn0_db`` is the mean *combined* Eb/N0; each of the ``diversity_order``
    branches carries an equal share. This is the scaling an orthogonal
    space-time code with unit total receive power produces, so the curve can be
    compared directly with simulated STBC links.
    """
    L = int(diversity_order)
    if L < 1:
        raise ValueError("diversity_order must be >= 1")
    amp, a = _ber_coefficients(c)
    g = 0.5 * a * db2lin(ebn0_db) / L
    mu = np.sqrt(g / (1.0 + g))
    lo = (1.0 / (1.0 + g)) / (1.0 + mu) / 2.0  # (1 - mu)/2 without cancellation
    hi = (1.0 + mu) / 2.0
    acc = sum(comb(L - 1 + l, l) * hi**l for l in range(L))
    val = amp * lo**L * acc
    return float(val) if np.ndim(val) == 0 else val


def log10_uncoded_ber_awgn(c, ebn0_db):
    """log10 of :func:`uncoded_ber_awgn`, finite where the linear value underflows."""
    from scipy.special import log_ndtr

    amp, a = _ber_coefficients(c)
    val = (np.log(amp) + log_ndtr(-np.sqrt(a * db2lin(ebn0_db)))) / np.log(10.0)
    return float(val) if np.ndim(val) == 0 else val


def constellation_table(c, normalized=True):
    """Rows ``(re, im, label_bits)`` in label order, for scatter dumps."""
    pts = c.points if normalized else c.raw_points
    k = c.bits_per_symbol
    return [
        {"re": float(p.real), "im": float(p.imag), "label_bits": format(i, f"0{k}b")}
        for i, p in enumerate(pts)
    ]
