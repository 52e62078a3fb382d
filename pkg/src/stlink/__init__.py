"""Link-level simulation of space-time coded QAM with turbo coding, plus multipath delay estimation."""

from .channel import ArrayGeometry, DopplerParams, PathSpec, doppler_psd, geometric_channel
from .errors import ConfigError, DegenerateChannelError, DegenerateDelaysError, IdentifiabilityError
from .fec import DecodeAlgorithm, InterleaverSpec, RscCode, SccCode, scc_decode, scc_encode
from .modem import Constellation, qam_demod_hard, qam_demod_llr, qam_modulate, uncoded_ber_awgn
from .sim import LinkConfig, StopRule, ber_sweep, tde_sweep
from .stbc import G2, G3, StbcScheme, stbc_detect, stbc_encode
from .tde import TdeScenario, estimate_delays

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry",
    "ConfigError",
    "Constellation",
    "DecodeAlgorithm",
    "DegenerateChannelError",
    "DegenerateDelaysError",
    "DopplerParams",
    "G2",
    "G3",
    "IdentifiabilityError",
    "InterleaverSpec",
    "LinkConfig",
    "PathSpec",
    "RscCode",
    "SccCode",
    "StbcScheme",
    "StopRule",
    "TdeScenario",
    "ber_sweep",
    "doppler_psd",
    "estimate_delays",
    "geometric_channel",
    "qam_demod_hard",
    "qam_demod_llr",
    "qam_modulate",
    "scc_decode",
    "scc_encode",
    "stbc_detect",
    "stbc_encode",
    "tde_sweep",
    "uncoded_ber_awgn",
]
