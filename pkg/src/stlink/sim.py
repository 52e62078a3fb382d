"""Monte Carlo harness for the coded space-time link and the delay estimator.

Every random draw comes from a generator seeded by ``(master_seed, point,
frame)`` so results do not depend on how frames are scheduled across threads.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import beta as beta_dist

from . import channel as ch
from .errors import ConfigError, DegenerateChannelError, DegenerateDelaysError, IdentifiabilityError
from .fec import DecodeAlgorithm, SccCode, scc_decode, scc_encode
from .fec.siso import LLR_CLAMP
from .modem import Constellation, ebn0_to_esn0, hard_labels, qam_demod_llr, qam_modulate
from .stbc import StbcScheme, apply_channel, combine, stbc_encode
from .tde import SearchGrid, estimate_delays, synthesize_received

CHANNEL_MODELS = ("rayleigh-iid", "awgn", "geometric")


@dataclass(frozen=True)
class LinkConfig:
    order: int = 16
    coding: str = "scc"
    code: SccCode = field(default_factory=SccCode)
    algorithm: DecodeAlgorithm = DecodeAlgorithm.LOG_MAP
    iterations: int = 8
    stbc: str = "g2"
    normalization: str = "per-antenna"
    n_rx: int = 1
    channel: str = "rayleigh-iid"
    fading: str = "block"  # one channel draw per STBC block, or "frame"
    channel_matrix: np.ndarray = None  # fixed H for the geometric model
    frame_bits: int = None  # information bits per frame; None means a full code frame
    exact_llr: bool = False

    def __post_init__(self):
        if self.coding not in ("none", "scc"):
            raise ConfigError(f"unknown coding {self.coding!r}", "fec.coding")
        if self.channel not in CHANNEL_MODELS:
            raise ConfigError(f"unknown channel model {self.channel!r}", "channel.model")
        if self.fading not in ("block", "frame"):
            raise ConfigError(f"unknown fading mode {self.fading!r}", "channel.fading")
        if self.n_rx < 1:
            raise ConfigError("n_rx must be >= 1", "channel.n_rx")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1", "fec.iterations")
        object.__setattr__(self, "algorithm", DecodeAlgorithm.parse(self.algorithm))
        Constellation(self.order)
        scheme = self.scheme
        if self.channel == "geometric":
            H = np.asarray(self.channel_matrix, dtype=complex) if self.channel_matrix is not None else None
            if H is None or H.shape != (self.n_rx, scheme.n_tx):
                raise ConfigError(
                    f"geometric channel must be {self.n_rx}x{scheme.n_tx}", "channel.paths"
                )
        fb = self.info_bits
        if fb < 1:
            raise ConfigError("frame_bits must be positive", "sweep.frame_bits")
        if self.coding == "scc" and fb > self.code.message_length:
            raise ConfigError(
                f"frame_bits {fb} exceeds the code's message length {self.code.message_length}",
                "sweep.frame_bits",
            )

    @property
    def constellation(self):
        return Constellation(self.order)

    @property
    def scheme(self):
        return StbcScheme(self.stbc, self.normalization)

    @property
    def info_bits(self):
        if self.frame_bits is not None:
            return int(self.frame_bits)
        return self.code.message_length if self.coding == "scc" else 4096

    @property
    def code_rate(self):
        """Information bits per coded bit, tails and padding included."""
        if self.coding == "none":
            return 1.0
        return self.info_bits / self.code.codeword_length

    @property
    def modulation_rate(self):
        """Overall rate seen by the modulator: FEC rate times STBC rate."""
        return self.code_rate * self.scheme.rate


@dataclass
class TrialResult:
    tx_bits: np.ndarray
    rx_bits: np.ndarray
    diagnostics: dict

    @property
    def errors(self):
        return int(np.count_nonzero(self.tx_bits != self.rx_bits))


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (tuple, list)):
        seed = np.random.SeedSequence([int(s) for s in seed])
    return np.random.default_rng(seed)


def _channel_draw(cfg, n_blocks, rng):
    scheme = cfg.scheme
    shape = (cfg.n_rx, scheme.n_tx)
    if cfg.channel == "awgn":
        return np.ones((1,) + shape, dtype=complex)
    if cfg.channel == "geometric":
        return np.asarray(cfg.channel_matrix, dtype=complex)[None]
    count = n_blocks if cfg.fading == "block" else 1
    return ch.rayleigh_realization(cfg.n_rx, scheme.n_tx, rng, size=count)


def transmit_blocks(cfg, symbols, esn0, rng, noiseless=False):
    """STBC-encode, pass through the channel and combine.

    Returns ``(z, nv_eff, H)`` where ``z`` holds the gain-normalized decision
    statistics (one per symbol) and ``nv_eff`` their noise variance.
    """
    scheme = cfg.scheme
    blocks = symbols.reshape(-1, scheme.symbols_per_block)
    C = stbc_encode(blocks, scheme)
    H = _channel_draw(cfg, blocks.shape[0], rng)
    ref = scheme.n_tx * scheme.amplitude**2
    frame = apply_channel(C, H, esn0, rng, noiseless=noiseless, reference_power=ref)
    stats = combine(frame, np.broadcast_to(H, (blocks.shape[0],) + H.shape[1:]), scheme)
    gain = np.broadcast_to(stats.gain, (blocks.shape[0],))
    if np.any(gain <= 0):
        raise DegenerateChannelError("channel realization with zero energy")
    z = (stats.statistic / gain[:, None]).reshape(-1)
    nv_eff = np.repeat(frame.noise_variance / gain, scheme.symbols_per_block)
    return z, nv_eff, H


def run_link_trial(cfg, ebn0_db, seed, noiseless=False):
    """One frame through encode, modulate, STBC, channel, combine, demap and decode."""
    rng = _rng(seed)
    c = cfg.constellation
    k = c.bits_per_symbol
    scheme = cfg.scheme
    info = rng.integers(0, 2, cfg.info_bits, dtype=np.uint8)

    if cfg.coding == "scc":
        K = cfg.code.message_length
        message = np.zeros(K, dtype=np.uint8)
        message[: info.size] = info
        coded = scc_encode(message, cfg.code)
    else:
        coded = info
    per_block = k * scheme.symbols_per_block
    n_pad = (-coded.size) % per_block
    tx_coded = np.concatenate([coded, np.zeros(n_pad, dtype=np.uint8)])

    symbols = qam_modulate(tx_coded, c)
    esn0 = float(ebn0_to_esn0(ebn0_db, k, cfg.modulation_rate))
    z, nv_eff, _ = transmit_blocks(cfg, symbols, esn0, rng, noiseless)

    if cfg.coding == "scc":
        llr = qam_demod_llr(z, nv_eff, c, exact=cfg.exact_llr).llr[: coded.size]
        apriori = None
        if info.size < cfg.code.message_length:
            apriori = np.zeros(cfg.code.message_length)
            apriori[info.size :] = LLR_CLAMP
        decided = scc_decode(llr, cfg.code, cfg.algorithm, cfg.iterations, message_apriori=apriori)
        rx = decided[: info.size]
    else:
        rx = c.labels_to_bits(hard_labels(z, c))[: info.size]

    diag = {
        "ebn0_db": float(ebn0_db),
        "esn0": esn0,
        "symbols": int(symbols.size),
        "blocks": int(symbols.size // scheme.symbols_per_block),
        "pad_bits": int(n_pad),
        "noiseless": bool(noiseless),
    }
    return TrialResult(info, rx.astype(np.uint8), diag)


@dataclass(frozen=True)
class StopRule:
    min_errors: int = 100
    max_bits: int = 10**8
    max_seconds: float = None  # wall-clock cap; makes results timing dependent
    batch_frames: int = 8

    def __post_init__(self):
        if self.min_errors < 1:
            raise ConfigError("min_errors must be >= 1", "stop.min_errors")
        if self.max_bits < 1:
            raise ConfigError("max_bits must be >= 1", "stop.max_bits")
        if self.batch_frames < 1:
            raise ConfigError("batch_frames must be >= 1", "stop.batch_frames")


@dataclass(frozen=True)
class BerPoint:
    ebn0_db: float
    frames: int
    bits: int
    errors: int
    ber: float
    ci95: float
    censored: bool

    def as_row(self):
        return {
            "ebn0_db": self.ebn0_db,
            "bits": self.bits,
            "errors": self.errors,
            "ber": self.ber,
            "ci95": self.ci95,
            "censored": int(self.censored),
        }


BER_COLUMNS = ("ebn0_db", "bits", "errors", "ber", "ci95", "censored")


def ber_upper_bound(errors, bits, level=0.95):
    """One-sided Clopper-Pearson upper bound on the error probability."""
    if errors >= bits:
        return 1.0
    return float(beta_dist.ppf(level, errors + 1, bits - errors))


def make_point(ebn0_db, frames, bits, errors, censored):
    if censored:
        return BerPoint(float(ebn0_db), frames, bits, errors, ber_upper_bound(errors, bits), 0.0, True)
    p = errors / bits
    return BerPoint(float(ebn0_db), frames, bits, errors, p, 1.96 * math.sqrt(p * (1 - p) / bits), False)


def frame_seed(master_seed, point_index, frame_index):
    return np.random.SeedSequence([int(master_seed), int(point_index), int(frame_index)])


def ber_sweep(cfg, ebn0_list, stop=None, master_seed=0, threads=1, trial=None, progress=None):
    """Bit error rate per Eb/N0 point under a stopping rule.

    Frames run in fixed-size batches; the stopping rule is checked between
    batches, so the frame count (and the result) does not depend on
    ``threads``. A point that exhausts ``max_bits`` (or ``max_seconds``)
    before collecting ``min_errors`` is flagged censored and reports the 95%
    upper confidence bound instead of the raw ratio.
    """
    ebn0_list = list(ebn0_list)
    if not ebn0_list:
        raise ConfigError("Eb/N0 list is empty", "sweep.ebn0_db")
    stop = stop or StopRule()
    trial = trial or run_link_trial
    points = []
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for pi, ebn0 in enumerate(ebn0_list):
            frames = bits = errors = 0
            started = time.monotonic()
            while True:
                idx = range(frames, frames + stop.batch_frames)
                run = lambda f, pi=pi, ebn0=ebn0: trial(cfg, ebn0, frame_seed(master_seed, pi, f))  # noqa: E731
                results = list(pool.map(run, idx)) if pool else [run(f) for f in idx]
                for res in results:
                    bits += res.tx_bits.size
                    errors += res.errors
                frames += len(results)
                if errors >= stop.min_errors:
                    censored = False
                    break
                if bits >= stop.max_bits or (
                    stop.max_seconds is not None and time.monotonic() - started > stop.max_seconds
                ):
                    censored = True
                    break
            point = make_point(ebn0, frames, bits, errors, censored)
            points.append(point)
            if progress:
                progress(point)
    finally:
        if pool:
            pool.shutdown()
    return points


@dataclass(frozen=True)
class CaptureRecords:
    tx: np.ndarray  # transmitted constellation points
    statistic: np.ndarray  # combined statistic divided by the equivalent gain
    gain: np.ndarray  # equivalent channel gain per symbol
    noise_variance: np.ndarray  # noise variance of ``statistic`` per symbol

    def __len__(self):
        return self.tx.size

    def rows(self):
        return [
            {"re": float(z.real), "im": float(z.imag), "tx_re": float(x.real),
             "tx_im": float(x.imag), "gain": float(g)}
            for z, x, g in zip(self.statistic, self.tx, self.gain)
        ]


CAPTURE_COLUMNS = ("re", "im", "tx_re", "tx_im", "gain")


def constellation_capture(cfg, ebn0_db, n_symbols, seed, noiseless=False):
    """Post-combining decision statistics (uncoded symbols) for scatter plots."""
    scheme = cfg.scheme
    if scheme.name not in ("g2", "g3"):
        raise ConfigError("constellation capture needs an STBC scheme (g2 or g3)", "stbc.scheme")
    rng = _rng(seed)
    c = cfg.constellation
    n = int(n_symbols)
    if n <= 0:
        empty = np.zeros(0, dtype=complex)
        return CaptureRecords(empty, empty, np.zeros(0), np.zeros(0))
    spb = scheme.symbols_per_block
    total = -(-n // spb) * spb
    labels = rng.integers(0, c.order, total)
    x = c.points[labels]
    esn0 = float(ebn0_to_esn0(ebn0_db, c.bits_per_symbol, scheme.rate))
    z, nv_eff, _ = transmit_blocks(cfg, x, esn0, rng, noiseless)
    # nv_eff = nv / gain, and nv is common to all blocks of the frame
    nv = (scheme.n_tx * scheme.amplitude**2) / esn0
    gain = nv / nv_eff
    return CaptureRecords(x[:n], z[:n], gain[:n], nv_eff[:n])


@dataclass
class TdeSweepResult:
    summary: list
    trials: list
    n_paths: int


TDE_SUMMARY_COLUMNS = ("snr_db", "path", "rmse", "median_abs_error", "failure_rate")


def tde_trial_columns(n_paths):
    return (
        ("snr_db", "trial")
        + tuple(f"tau_true_{k + 1}" for k in range(n_paths))
        + tuple(f"tau_hat_{k + 1}" for k in range(n_paths))
        + ("abs_error", "residual")
    )


def _tde_one(template, snr_db, seed, threshold_fraction, search):
    sc = template.with_snr(snr_db)
    rng = _rng(seed)
    r = synthesize_received(sc, rng)
    try:
        est = estimate_delays(
            r, sc.pulse, sc.n_paths, threshold_fraction, search, sc.sample_interval
        )
    except (IdentifiabilityError, DegenerateDelaysError):
        return None
    return est


def tde_sweep(template, snr_list, trials, master_seed=0, threshold_fraction=0.1,
              search=None, threads=1):
    """Delay-error statistics per SNR. ``None`` or ``inf`` in ``snr_list`` means noiseless.

    Identifiability failures are counted per SNR rather than raised.
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1", "tde.trials")
    search = search or SearchGrid()
    truth = np.sort(np.asarray(template.delays, dtype=float))
    M = template.n_paths
    summary, records = [], []
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for si, snr in enumerate(snr_list):
            seeds = [frame_seed(master_seed, si, t) for t in range(trials)]
            run = lambda sd, snr=snr: _tde_one(template, snr, sd, threshold_fraction, search)  # noqa: E731
            ests = list(pool.map(run, seeds)) if pool else [run(sd) for sd in seeds]
            errs = []
            failures = 0
            snr_val = math.inf if snr is None else float(snr)
            for t, est in enumerate(ests):
                if est is None:
                    failures += 1
                    continue
                e = np.abs(est.delays - truth)
                errs.append(e)
                row = {"snr_db": snr_val, "trial": t}
                row.update({f"tau_true_{k + 1}": float(truth[k]) for k in range(M)})
                row.update({f"tau_hat_{k + 1}": float(est.delays[k]) for k in range(M)})
                row.update({"abs_error": float(e.max()), "residual": float(est.residual)})
                records.append(row)
            errs = np.array(errs).reshape(-1, M)
            for k in range(M):
                col = errs[:, k]
                summary.append({
                    "snr_db": snr_val,
                    "path": k + 1,
                    "rmse": float(np.sqrt(np.mean(col**2))) if col.size else math.nan,
                    "median_abs_error": float(np.median(col)) if col.size else math.nan,
                    "failure_rate": failures / trials,
                })
    finally:
        if pool:
            pool.shutdown()
    return TdeSweepResult(summary, records, M)


def with_iterations(cfg, iterations):
    return replace(cfg, iterations=int(iterations))
