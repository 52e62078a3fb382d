"""Multipath time-delay estimation by frequency-domain least squares.

The received record is ``r[n] = sum_k a_k s(n Ts - tau_k) + w[n]`` with
circular (DFT-periodic) delays. Amplitudes enter linearly, so for a given set
of delays they are eliminated by projecting the observed spectrum onto the
column space of the delayed pulse spectra; only the delays are searched.
Delays are carried internally as ``lam_k = -2 pi tau_k / (N Ts)`` so that the
steering entries are ``exp(1j * lam_k * q)`` on DFT bin ``q``.
"""

import itertools
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_triangular

from ._accel import njit, select
from .errors import ConfigError, DegenerateDelaysError, IdentifiabilityError

_RANK_TOL = 1e-10
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def default_pulse(n=64, bandwidth=0.4, width=None):
    """Unit-energy Gaussian-windowed sinc centred (circularly) on sample 0.

    ``bandwidth`` is the occupied fraction of the Nyquist band.
    """
    width = n / 8.0 if width is None else width
    t = (np.arange(n) + n // 2) % n - n // 2
    s = np.sinc(bandwidth * t) * np.exp(-(t**2) / (2.0 * width**2))
    return s / np.linalg.norm(s)


@dataclass(frozen=True)
class TdeScenario:
    pulse: np.ndarray
    amplitudes: tuple = (1.0,)
    delays: tuple = (0.0,)  # seconds
    sample_interval: float = 1.0
    noise_variance: float = 0.0  # per-sample variance of w[n]

    def __post_init__(self):
        pulse = np.asarray(self.pulse)
        n = pulse.size
        if n < 4 or n & (n - 1):
            raise ConfigError(f"sample count must be a power of 2, got {n}", "tde.n")
        object.__setattr__(self, "pulse", pulse)
        object.__setattr__(self, "amplitudes", tuple(np.atleast_1d(self.amplitudes).tolist()))
        object.__setattr__(self, "delays", tuple(float(d) for d in np.atleast_1d(self.delays)))
        if len(self.amplitudes) != len(self.delays) or not self.delays:
            raise ConfigError("need one amplitude per delay and at least one path", "tde.delays")
        if not self.sample_interval > 0:
            raise ConfigError("sample interval must be positive", "tde.sample_interval")
        if self.noise_variance < 0:
            raise ConfigError("noise variance must be >= 0", "tde.noise_variance")

    @property
    def n(self):
        return self.pulse.size

    @property
    def n_paths(self):
        return len(self.delays)

    @property
    def window(self):
        return self.n * self.sample_interval

    @property
    def is_real(self):
        return not (np.iscomplexobj(self.pulse) or any(isinstance(a, complex) for a in self.amplitudes))

    def with_snr(self, snr_db):
        """Copy with noise set from the mean per-sample pulse power; ``None``/inf disables noise."""
        if snr_db is None or np.isinf(snr_db):
            return replace(self, noise_variance=0.0)
        power = np.sum(np.abs(self.pulse) ** 2) / self.n
        return replace(self, noise_variance=float(power / 10.0 ** (snr_db / 10.0)))


def delays_to_lambda(delays, n, ts):
    return -2.0 * np.pi * np.asarray(delays, dtype=float) / (n * ts)


def lambda_to_delays(lam, n, ts):
    return -np.asarray(lam, dtype=float) * n * ts / (2.0 * np.pi)


def synthesize_received(scenario, rng=None):
    """Noisy superposition of fractionally delayed pulse copies."""
    sc = scenario
    for d in sc.delays:
        if not 0.0 <= d < sc.window:
            raise ValueError(f"delay {d} outside observation window [0, {sc.window})")
    n = sc.n
    tau = np.asarray(sc.delays) / sc.sample_interval  # in samples
    amps = np.asarray(sc.amplitudes)
    if sc.is_real:
        spec = np.fft.rfft(sc.pulse)
        k = np.arange(spec.size)
        shift = (amps[None, :] * np.exp(-2j * np.pi * np.outer(k, tau) / n)).sum(axis=1)
        # irfft keeps only the real part of the Nyquist bin
        r = np.fft.irfft(spec * shift, n=n)
    else:
        spec = np.fft.fft(sc.pulse)
        k = np.fft.fftfreq(n, d=1.0 / n)
        shift = (amps[None, :] * np.exp(-2j * np.pi * np.outer(k, tau) / n)).sum(axis=1)
        r = np.fft.ifft(spec * shift)
    if sc.noise_variance > 0:
        if rng is None:
            raise ValueError("rng is required for a noisy scenario")
        sd = np.sqrt(sc.noise_variance)
        if sc.is_real:
            r = r + sd * rng.standard_normal(n)
        else:
            r = r + sd / np.sqrt(2.0) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return r


@dataclass(frozen=True)
class SpectralSelection:
    threshold: float
    bins: np.ndarray
    pulse_spectrum: np.ndarray  # S[q] on the selected bins

    @property
    def size(self):
        return self.bins.size

    def observe(self, r):
        """Received spectrum ``R[q]`` on the selected bins."""
        return np.fft.fft(np.asarray(r))[self.bins]


def select_bins(pulse, threshold_fraction=0.1, n_paths=1):
    """Keep the lower-half DFT bins whose pulse magnitude exceeds a fraction of the peak."""
    if not 0.0 < threshold_fraction < 1.0:
        raise ConfigError("threshold_fraction must lie in (0, 1)", "threshold_fraction")
    s = np.asarray(pulse)
    spec = np.fft.fft(s)
    mag = np.abs(spec)
    thr = threshold_fraction * mag.max()
    half = np.arange(s.size // 2)
    bins = half[mag[half] > thr]
    if bins.size == 0 or bins.size < n_paths:
        raise IdentifiabilityError(
            f"{bins.size} bins above threshold, need at least {n_paths}"
        )
    return SpectralSelection(float(thr), bins, spec[bins])


def steering_matrix(lam, bins):
    bins = np.asarray(bins)
    if bins.size == 0:
        raise ValueError("no bins selected")
    return np.exp(1j * np.outer(bins, np.atleast_1d(lam)))


def steering_response(lam, selection):
    """Delayed pulse spectra as columns: ``diag(S) @ A(lam)``."""
    return selection.pulse_spectrum[:, None] * steering_matrix(lam, selection.bins)


def _stack(z):
    z = np.asarray(z)
    return np.concatenate([z.real, z.imag], axis=0)


def _thin_qr(p):
    q, r = np.linalg.qr(p, mode="reduced")
    d = np.abs(np.diag(r))
    if d.size and d.min() <= _RANK_TOL * max(d.max(), np.finfo(float).tiny):
        raise DegenerateDelaysError("steering response is rank deficient (coincident delays?)")
    return q, r


def projected_error(lam, selection, r_tilde, real_amplitudes=False):
    """Squared residual of ``r_tilde`` after projection onto the steering columns.

    With ``real_amplitudes`` the span is taken over real coefficients (real and
    imaginary parts stacked), the exact model when pulse and record are real.
    """
    p = steering_response(lam, selection)
    rt = np.asarray(r_tilde)
    if real_amplitudes:
        p, rt = _stack(p), _stack(rt)
    q, _ = _thin_qr(p)
    resid = rt - q @ (q.conj().T @ rt)
    return float(np.real(np.vdot(resid, resid)))


def solve_amplitudes(lam, selection, r_tilde, real_amplitudes=False):
    """Least-squares amplitudes by back-substitution on the thin QR factors."""
    p = steering_response(lam, selection)
    rt = np.asarray(r_tilde)
    if real_amplitudes:
        p, rt = _stack(p), _stack(rt)
    q, r = _thin_qr(p)
    return solve_triangular(r, q.conj().T @ rt)


@njit
def _grid_errors_loops(lams, bins, spec, rt, min_sep, real_amp):
    G, M = lams.shape
    L = bins.size
    out = np.empty(G)
    qs = np.empty((M, L), dtype=np.complex128)
    for g in range(G):
        bad = False
        for a in range(M):
            for b in range(a + 1, M):
                if abs(lams[g, a] - lams[g, b]) < min_sep:
                    bad = True
        if bad:
            out[g] = np.inf
            continue
        res = rt.copy()
        for m in range(M):
            col = np.empty(L, dtype=np.complex128)
            nrm0 = 0.0
            for l in range(L):
                col[l] = spec[l] * np.exp(1j * lams[g, m] * bins[l])
                nrm0 += col[l].real ** 2 + col[l].imag ** 2
            for p in range(m):
                dot = 0.0 + 0.0j
                for l in range(L):
                    dot += np.conj(qs[p, l]) * col[l]
                if real_amp:
                    dot = dot.real + 0.0j
                for l in range(L):
                    col[l] -= dot * qs[p, l]
            nrm = 0.0
            for l in range(L):
                nrm += col[l].real ** 2 + col[l].imag ** 2
            if nrm <= (_RANK_TOL**2) * nrm0:
                bad = True
                break
            nrm = np.sqrt(nrm)
            dot = 0.0 + 0.0j
            for l in range(L):
                qs[m, l] = col[l] / nrm
                dot += np.conj(qs[m, l]) * res[l]
            if real_amp:
                dot = dot.real + 0.0j
            for l in range(L):
                res[l] -= dot * qs[m, l]
        if bad:
            out[g] = np.inf
            continue
        e = 0.0
        for l in range(L):
            e += res[l].real ** 2 + res[l].imag ** 2
        out[g] = e
    return out


def _grid_errors_vectorized(lams, bins, spec, rt, min_sep, real_amp):
    proj = np.real if real_amp else (lambda z: z)
    G, M = lams.shape
    bad = np.zeros(G, dtype=bool)
    for a in range(M):
        for b in range(a + 1, M):
            bad |= np.abs(lams[:, a] - lams[:, b]) < min_sep
    cols = spec[None, :, None] * np.exp(1j * bins[None, :, None] * lams[:, None, :])  # (G, L, M)
    res = np.broadcast_to(rt, (G, rt.size)).copy()
    qs = []
    for m in range(M):
        col = cols[:, :, m]
        nrm0 = np.sum(np.abs(col) ** 2, axis=1)
        for q in qs:
            col = col - proj(np.sum(q.conj() * col, axis=1, keepdims=True)) * q
        nrm = np.sum(np.abs(col) ** 2, axis=1)
        bad |= nrm <= (_RANK_TOL**2) * nrm0
        q = col / np.sqrt(np.where(nrm > 0, nrm, 1.0))[:, None]
        qs.append(q)
        res = res - proj(np.sum(q.conj() * res, axis=1, keepdims=True)) * q
    out = np.sum(np.abs(res) ** 2, axis=1)
    out[bad] = np.inf
    return out


_grid_errors = select(_grid_errors_loops, _grid_errors_vectorized)


def grid_errors(lams, selection, r_tilde, min_sep=0.0, real_amplitudes=False, kernel=None):
    """Projected error for a batch of delay vectors given as ``lam`` rows.

    Gram-Schmidt runs column by column, so the ``m``-th orthonormal vector
    depends only on the first ``m`` delays, as in a thin QR factorization.
    """
    fn = kernel or _grid_errors
    lams = np.ascontiguousarray(np.atleast_2d(lams), dtype=float)
    return fn(
        lams,
        selection.bins.astype(float),
        np.ascontiguousarray(selection.pulse_spectrum, dtype=complex),
        np.ascontiguousarray(r_tilde, dtype=complex),
        float(min_sep),
        bool(real_amplitudes),
    )


@dataclass(frozen=True)
class SearchGrid:
    """Delay search settings, all in units of the sample interval."""

    window: tuple = None  # (lo, hi) in samples; None means the whole record
    coarse_step: float = 0.25
    resolution: float = 1.0 / 256.0
    min_separation: float = 1.0 / 64.0
    max_sweeps: int = 200
    chunk: int = 1 << 16


@dataclass(frozen=True)
class DelayEstimate:
    lam: np.ndarray
    delays: np.ndarray  # seconds, ascending
    amplitudes: np.ndarray
    residual: float
    diagnostics: dict = field(default_factory=dict)


def _golden(f, lo, hi, tol, f_best, x_best):
    """Golden-section minimization on [lo, hi]; never returns worse than ``(x_best, f_best)``."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    evals = 2
    best = (f_best, x_best)
    for x, fx in ((c, fc), (d, fd)):
        if fx < best[0]:
            best = (fx, x)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
            x, fx = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
            x, fx = d, fd
        evals += 1
        if fx < best[0]:
            best = (fx, x)
    return best[1], best[0], evals


def estimate_delays(
    r, pulse, n_paths, threshold_fraction=0.1, search=None, sample_interval=1.0, real_amplitudes=None
):
    """Least-squares delays and amplitudes for a known number of paths.

    A coarse exhaustive grid over ordered delay tuples is followed by
    coordinate-wise golden-section refinement; every accepted move lowers the
    projected error, so the refined residual never exceeds the best grid point.
    ``real_amplitudes=None`` constrains amplitudes to be real when both the
    record and the pulse are real.
    """
    search = search or SearchGrid()
    M = int(n_paths)
    if M < 1:
        raise ConfigError("path count must be >= 1", "n_paths")
    r = np.asarray(r)
    n = r.size
    if real_amplitudes is None:
        real_amplitudes = not (np.iscomplexobj(r) or np.iscomplexobj(pulse))
    sel = select_bins(pulse, threshold_fraction, M)
    rt = sel.observe(r)
    lo, hi = search.window if search.window is not None else (0.0, float(n))
    if not hi > lo:
        raise ConfigError("search window is empty", "search.window")
    step = search.coarse_step
    grid = lo + step * np.arange(int(np.ceil((hi - lo) / step - 1e-12)))
    if grid.size < M:
        raise ConfigError("search window holds fewer grid points than paths", "search.window")
    to_lam = lambda taus: -2.0 * np.pi * np.asarray(taus) / n  # noqa: E731  (taus in samples)
    min_sep = 2.0 * np.pi * search.min_separation / n

    best_e, best_idx = np.inf, None
    combos = itertools.combinations(range(grid.size), M)
    while True:
        block = np.fromiter(itertools.chain.from_iterable(itertools.islice(combos, search.chunk)),
                            dtype=np.int64)
        if block.size == 0:
            break
        idx = block.reshape(-1, M)
        errs = grid_errors(to_lam(grid[idx]), sel, rt, min_sep, real_amplitudes)
        j = int(np.argmin(errs))
        if errs[j] < best_e:
            best_e, best_idx = float(errs[j]), idx[j]
    if best_idx is None or not np.isfinite(best_e):
        raise DegenerateDelaysError("no admissible delay combination on the grid")
    taus = grid[best_idx].astype(float)
    coarse_e = best_e

    def err_at(vec):
        return float(grid_errors(to_lam(vec)[None, :], sel, rt, min_sep, real_amplitudes)[0])

    evals = 0
    sweeps = 0
    tol = search.resolution / 8.0
    for sweeps in range(1, search.max_sweeps + 1):
        moved = 0.0
        start_e = best_e
        for k in range(M):
            a = max(lo, taus[k] - step)
            b = min(hi, taus[k] + step)

            def f(x, k=k):
                trial = taus.copy()
                trial[k] = x
                return err_at(trial)

            x, e, ne = _golden(f, a, b, tol, best_e, taus[k])
            evals += ne
            if e < best_e:
                moved = max(moved, abs(x - taus[k]))
                taus[k], best_e = x, e
        # coupled coordinates creep, so stop on stalled progress rather than small steps
        if moved < tol or start_e - best_e <= 1e-12 * start_e:
            break

    order = np.argsort(taus)
    taus = taus[order]
    lam = to_lam(taus)
    amps = solve_amplitudes(lam, sel, rt, real_amplitudes)
    resid = projected_error(lam, sel, rt, real_amplitudes)
    return DelayEstimate(
        lam=lam,
        delays=taus * sample_interval,
        amplitudes=amps,
        residual=resid,
        diagnostics={
            "coarse_step": step * sample_interval,
            "resolution": search.resolution * sample_interval,
            "coarse_residual": coarse_e,
            "refined_residual": best_e,
            "sweeps": sweeps,
            "evaluations": evals,
            "bins": int(sel.size),
            "real_amplitudes": bool(real_amplitudes),
        },
    )


def cross_correlate(r, s):
    """Normalized circular cross-correlation at integer lags ``0..len(r)-1``.

    Returns ``(corr, peak_lag)``; the peak is taken on ``|corr|``.
    """
    r = np.asarray(r)
    s = np.asarray(s)
    if s.size > r.size:
        raise ValueError("template longer than the received record")
    er, es = np.linalg.norm(r), np.linalg.norm(s)
    if er == 0 or es == 0:
        raise ValueError("zero-energy input")
    sp = np.zeros(r.size, dtype=s.dtype)
    sp[: s.size] = s
    corr = np.fft.ifft(np.fft.fft(r) * np.conj(np.fft.fft(sp))) / (er * es)
    if not (np.iscomplexobj(r) or np.iscomplexobj(s)):
        corr = corr.real
    return corr, int(np.argmax(np.abs(corr)))
