"""Serially concatenated turbo coding."""

from .interleaver import InterleaverSpec, quadratic_permute, quadratic_unpermute
from .scc import SccCode, scc_decode, scc_encode
from .siso import DecodeAlgorithm, bcjr, siso_decode
from .trellis import RscCode, free_distance, rsc_encode, trace_final_state

__all__ = [
    "DecodeAlgorithm",
    "InterleaverSpec",
    "RscCode",
    "SccCode",
    "bcjr",
    "free_distance",
    "quadratic_permute",
    "quadratic_unpermute",
    "rsc_encode",
    "scc_decode",
    "scc_encode",
    "siso_decode",
    "trace_final_state",
]
