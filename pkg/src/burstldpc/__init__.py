"""Burst-aware LDPC decoding over differentially coded QAM with bursty phase noise."""
from .channel import GeChannelParams, REFERENCE_PARAMS, steady_state, mean_durations, transmit
from .constellation import build_qam
from .estimator import StatePosterior, TrellisInputs, bcjr, sova, viterbi
from .harness import SweepSpec, run_sweep, load_config, emit_csv
from .ldpc import ParityCheckMatrix, decode_bp, encode, load_alist, load_code
from .pipeline import SchemeConfig, make_link, run_scheme, simulate_frame

__version__ = "0.1.0"

__all__ = [
    "GeChannelParams", "REFERENCE_PARAMS", "steady_state", "mean_durations", "transmit",
    "build_qam", "StatePosterior", "TrellisInputs", "bcjr", "sova", "viterbi",
    "SweepSpec", "run_sweep", "load_config", "emit_csv",
    "ParityCheckMatrix", "decode_bp", "encode", "load_alist", "load_code",
    "SchemeConfig", "make_link", "run_scheme", "simulate_frame",
]
