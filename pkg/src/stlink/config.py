"""Experiment TOML: parsing, defaults, validation and builders.

:func:`normalize` turns a raw mapping into a fully populated, validated
mapping whose TOML dump re-parses to the same mapping. The ``build_*``
helpers turn the normalized mapping into runtime objects.
"""

import copy
import math
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

from .channel import ArrayGeometry, DopplerParams, PathSpec, geometric_channel
from .errors import ConfigError
from .fec import DecodeAlgorithm, InterleaverSpec, RscCode, SccCode
from .sim import LinkConfig, StopRule
from .stbc import StbcScheme
from .tde import SearchGrid, TdeScenario, default_pulse

DEFAULTS = {
    "modem": {"order": 16, "llr": "maxlog"},
    "fec": {
        "coding": "scc",
        "algorithm": "log-map",
        "iterations": 8,
        "outer": {"feedback": "7", "feedforward": ["5"], "k_in": 1},
        "inner": {"feedback": "7", "feedforward": ["5"], "k_in": 2},
        "interleaver": {"length": 4096, "multiplier": 1},
    },
    "stbc": {"scheme": "g2", "normalization": "per-antenna"},
    "channel": {
        "model": "rayleigh-iid",
        "n_rx": 1,
        "fading": "block",
        "paths": [],
        "geometry": {"length_t": 1.0, "length_r": 0.5, "wavelength": 0.125},
        "doppler": {"centers": [-0.8, 0.4], "gains": [1.0, 0.1], "sigmas": [0.05, 0.1]},
    },
    "sweep": {"ebn0_db": [0.0, 3.0, 6.0, 9.0], "seed": 1},
    "stop": {"min_errors": 100, "max_bits": 100_000_000, "batch_frames": 8},
    "tde": {
        "n": 64,
        "sample_interval": 1.0,
        "amplitudes": [1.0, 0.6],
        "delays": [20.3, 25.3],
        "snr_db": [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
        "trials": 200,
        "threshold_fraction": 0.1,
        "seed": 1,
        "pulse": {"kind": "sinc-gauss", "bandwidth": 0.4},
        "search": {"coarse_step": 0.25, "resolution": 1.0 / 256.0, "min_separation": 1.0 / 64.0},
    },
    "psd": {"f_min": -2.0, "f_max": 2.0, "points": 401},
    "capture": {"ebn0_db": 10.0, "n_symbols": 2000, "seed": 1, "noiseless": False},
}

_PATH_KEYS = {"attenuation_re": 1.0, "attenuation_im": 0.0, "omega_t": 0.0, "omega_r": 0.0,
              "distance": 0.0}


def _merge(defaults, raw, prefix):
    out = {}
    if not isinstance(raw, dict):
        raise ConfigError("expected a table", prefix.rstrip("."))
    for key in raw:
        if key not in defaults and key not in ("window", "file", "width", "max_seconds",
                                               "frame_bits", "k", "spec"):
            raise ConfigError("unknown key", prefix + key)
    for key, dval in defaults.items():
        if isinstance(dval, dict):
            out[key] = _merge(dval, raw.get(key, {}), f"{prefix}{key}.")
        else:
            out[key] = copy.deepcopy(raw.get(key, dval))
    for key in raw:
        if key not in defaults:
            out[key] = copy.deepcopy(raw[key])
    return out


def _num(table, key, prefix, kind=float, positive=False, nonneg=False):
    val = table[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"expected a number, got {val!r}", prefix + key)
    if kind is int:
        if float(val) != int(val):
            raise ConfigError(f"expected an integer, got {val!r}", prefix + key)
        val = int(val)
    else:
        val = float(val)
    if positive and not val > 0:
        raise ConfigError("must be positive", prefix + key)
    if nonneg and val < 0:
        raise ConfigError("must be non-negative", prefix + key)
    table[key] = val
    return val


def _octal(table, key, prefix):
    val = table[key]
    vals = val if isinstance(val, list) else [val]
    out = []
    for v in vals:
        s = str(v)
        try:
            int(s, 8)
        except ValueError:
            raise ConfigError(f"not an octal polynomial: {v!r}", prefix + key) from None
        out.append(s)
    table[key] = out if isinstance(val, list) else out[0]


def normalize(raw):
    """Validate ``raw`` and fill defaults. Raises :class:`ConfigError` naming the field."""
    cfg = _merge(DEFAULTS, raw or {}, "")

    m = cfg["modem"]
    _num(m, "order", "modem.", int)
    if m["llr"] not in ("maxlog", "exact"):
        raise ConfigError("must be 'maxlog' or 'exact'", "modem.llr")

    f = cfg["fec"]
    if f["coding"] not in ("none", "scc"):
        raise ConfigError("must be 'none' or 'scc'", "fec.coding")
    try:
        f["algorithm"] = DecodeAlgorithm.parse(f["algorithm"]).label
    except ValueError as exc:
        raise ConfigError(str(exc), "fec.algorithm") from None
    if _num(f, "iterations", "fec.", int) < 1:
        raise ConfigError("must be >= 1", "fec.iterations")
    for part in ("outer", "inner"):
        _octal(f[part], "feedback", f"fec.{part}.")
        _octal(f[part], "feedforward", f"fec.{part}.")
        if not isinstance(f[part]["feedforward"], list):
            f[part]["feedforward"] = [f[part]["feedforward"]]
        _num(f[part], "k_in", f"fec.{part}.", int, positive=True)
    il = f["interleaver"]
    n = _num(il, "length", "fec.interleaver.", int, positive=True)
    if n & (n - 1):
        raise ConfigError(f"must be a power of 2, got {n}", "fec.interleaver.length")
    k = _num(il, "multiplier", "fec.interleaver.", int, positive=True)
    if k % 2 == 0:
        raise ConfigError(f"must be odd, got {k}", "fec.interleaver.multiplier")

    st = cfg["stbc"]
    try:
        StbcScheme(st["scheme"], st["normalization"])
    except ConfigError as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], exc.field) from None

    c = cfg["channel"]
    if c["model"] not in ("rayleigh-iid", "awgn", "geometric"):
        raise ConfigError(f"unknown model {c['model']!r}", "channel.model")
    _num(c, "n_rx", "channel.", int, positive=True)
    if c["fading"] not in ("block", "frame"):
        raise ConfigError("must be 'block' or 'frame'", "channel.fading")
    paths = []
    for i, p in enumerate(c["paths"]):
        if not isinstance(p, dict):
            raise ConfigError("each path must be a table", f"channel.paths[{i}]")
        q = _merge(_PATH_KEYS, p, f"channel.paths[{i}].")
        for key in _PATH_KEYS:
            _num(q, key, f"channel.paths[{i}].")
        if abs(q["omega_t"]) > 1 or abs(q["omega_r"]) > 1:
            raise ConfigError("directional cosines must lie in [-1, 1]", f"channel.paths[{i}]")
        paths.append(q)
    c["paths"] = paths
    if c["model"] == "geometric" and not paths:
        raise ConfigError("geometric model needs at least one path", "channel.paths")
    for key in ("length_t", "length_r", "wavelength"):
        _num(c["geometry"], key, "channel.geometry.", positive=True)
    d = c["doppler"]
    for key in ("centers", "gains", "sigmas"):
        d[key] = [float(v) for v in d[key]]
    try:
        DopplerParams(tuple(d["centers"]), tuple(d["gains"]), tuple(d["sigmas"]))
    except ConfigError as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], "channel." + (exc.field or "doppler")) from None

    sw = cfg["sweep"]
    if not isinstance(sw["ebn0_db"], list) or not sw["ebn0_db"]:
        raise ConfigError("must be a non-empty list", "sweep.ebn0_db")
    sw["ebn0_db"] = [float(v) for v in sw["ebn0_db"]]
    _num(sw, "seed", "sweep.", int, nonneg=True)
    if "frame_bits" in sw:
        _num(sw, "frame_bits", "sweep.", int, positive=True)

    sp = cfg["stop"]
    if _num(sp, "min_errors", "stop.", int) < 1:
        raise ConfigError("must be >= 1", "stop.min_errors")
    _num(sp, "max_bits", "stop.", int, positive=True)
    _num(sp, "batch_frames", "stop.", int, positive=True)
    if "max_seconds" in sp:
        _num(sp, "max_seconds", "stop.", positive=True)

    t = cfg["tde"]
    nn = _num(t, "n", "tde.", int, positive=True)
    if nn < 4 or nn & (nn - 1):
        raise ConfigError(f"must be a power of 2, got {nn}", "tde.n")
    ts = _num(t, "sample_interval", "tde.", positive=True)
    t["amplitudes"] = [float(v) for v in t["amplitudes"]]
    t["delays"] = [float(v) for v in t["delays"]]
    if len(t["amplitudes"]) != len(t["delays"]) or not t["delays"]:
        raise ConfigError("need one amplitude per delay", "tde.delays")
    for dl in t["delays"]:
        if not 0 <= dl < nn * ts:
            raise ConfigError(f"delay {dl} outside [0, {nn * ts})", "tde.delays")
    t["snr_db"] = [float(v) for v in t["snr_db"]]
    _num(t, "trials", "tde.", int, positive=True)
    frac = _num(t, "threshold_fraction", "tde.")
    if not 0 < frac < 1:
        raise ConfigError("must lie in (0, 1)", "tde.threshold_fraction")
    _num(t, "seed", "tde.", int, nonneg=True)
    pulse = t["pulse"]
    if pulse["kind"] not in ("sinc-gauss", "file"):
        raise ConfigError("must be 'sinc-gauss' or 'file'", "tde.pulse.kind")
    if pulse["kind"] == "file" and "file" not in pulse:
        raise ConfigError("file pulse needs a 'file' entry", "tde.pulse.file")
    frac_bw = _num(pulse, "bandwidth", "tde.pulse.", positive=True)
    if frac_bw > 1:
        raise ConfigError("must be <= 1", "tde.pulse.bandwidth")
    if "width" in pulse:
        _num(pulse, "width", "tde.pulse.", positive=True)
    se = t["search"]
    for key in ("coarse_step", "resolution", "min_separation"):
        _num(se, key, "tde.search.", positive=True)
    if "window" in se:
        w = se["window"]
        if not (isinstance(w, list) and len(w) == 2 and float(w[1]) > float(w[0])):
            raise ConfigError("must be [lo, hi] with hi > lo", "tde.search.window")
        se["window"] = [float(w[0]), float(w[1])]

    ps = cfg["psd"]
    _num(ps, "f_min", "psd.")
    _num(ps, "f_max", "psd.")
    if ps["f_max"] <= ps["f_min"]:
        raise ConfigError("f_max must exceed f_min", "psd.f_max")
    _num(ps, "points", "psd.", int, positive=True)

    cp = cfg["capture"]
    _num(cp, "ebn0_db", "capture.")
    _num(cp, "n_symbols", "capture.", int, nonneg=True)
    _num(cp, "seed", "capture.", int, nonneg=True)
    if not isinstance(cp["noiseless"], bool):
        raise ConfigError("must be true or false", "capture.noiseless")

    # semantic checks that need the runtime objects
    build_link(cfg)
    return cfg


def load(path):
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}", "config") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}", "config") from None
    cfg = normalize(raw)
    cfg.setdefault("_base", str(path.parent.resolve()))
    return cfg


def dumps(cfg):
    return tomli_w.dumps({k: v for k, v in cfg.items() if not k.startswith("_")})


def _rsc(table):
    return RscCode(
        feedback=table["feedback"],
        feedforward=tuple(table["feedforward"]),
        k_in=int(table["k_in"]),
    )


def build_code(cfg):
    f = cfg["fec"]
    il = f["interleaver"]
    try:
        return SccCode(_rsc(f["outer"]), _rsc(f["inner"]), InterleaverSpec(il["length"], il["multiplier"]))
    except ConfigError as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], "fec." + (exc.field or "")) from None


def build_geometric_channel(cfg):
    c = cfg["channel"]
    scheme = StbcScheme(cfg["stbc"]["scheme"], cfg["stbc"]["normalization"])
    g = c["geometry"]
    geom = ArrayGeometry(scheme.n_tx, c["n_rx"], g["length_t"], g["length_r"], g["wavelength"])
    paths = [
        PathSpec(complex(p["attenuation_re"], p["attenuation_im"]), p["omega_t"], p["omega_r"], p["distance"])
        for p in c["paths"]
    ]
    return geometric_channel(paths, geom)


def build_link(cfg):
    c = cfg["channel"]
    H = build_geometric_channel(cfg) if c["model"] == "geometric" else None
    try:
        return LinkConfig(
            order=cfg["modem"]["order"],
            coding=cfg["fec"]["coding"],
            code=build_code(cfg),
            algorithm=cfg["fec"]["algorithm"],
            iterations=cfg["fec"]["iterations"],
            stbc=cfg["stbc"]["scheme"],
            normalization=cfg["stbc"]["normalization"],
            n_rx=c["n_rx"],
            channel=c["model"],
            fading=c["fading"],
            channel_matrix=H,
            frame_bits=cfg["sweep"].get("frame_bits"),
            exact_llr=cfg["modem"]["llr"] == "exact",
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), "modem.order") from None


def build_stop(cfg):
    s = cfg["stop"]
    return StopRule(s["min_errors"], s["max_bits"], s.get("max_seconds"), s["batch_frames"])


def build_doppler(cfg):
    d = cfg["channel"]["doppler"]
    return DopplerParams(tuple(d["centers"]), tuple(d["gains"]), tuple(d["sigmas"]))


def build_pulse(cfg):
    t = cfg["tde"]
    p = t["pulse"]
    if p["kind"] == "file":
        path = Path(p["file"])
        if not path.is_absolute():
            path = Path(cfg.get("_base", ".")) / path
        try:
            pulse = np.loadtxt(path, dtype=float).reshape(-1)
        except OSError as exc:
            raise ConfigError(f"cannot read pulse file: {exc}", "tde.pulse.file") from None
        if pulse.size != t["n"]:
            raise ConfigError(f"pulse file has {pulse.size} samples, expected {t['n']}", "tde.pulse.file")
        return pulse
    return default_pulse(t["n"], p["bandwidth"], p.get("width"))


def build_tde(cfg):
    t = cfg["tde"]
    scenario = TdeScenario(
        build_pulse(cfg), tuple(t["amplitudes"]), tuple(t["delays"]), t["sample_interval"]
    )
    se = t["search"]
    ts = t["sample_interval"]
    window = tuple(v / ts for v in se["window"]) if "window" in se else None
    search = SearchGrid(window, se["coarse_step"], se["resolution"], se["min_separation"])
    return scenario, search


def snr_values(values):
    return [None if math.isinf(v) else v for v in values]
