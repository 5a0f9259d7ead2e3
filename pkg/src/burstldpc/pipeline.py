"""End-to-end link: transmitter, bursty channel, and the baseline / BA / IBA receivers."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .channel import GeChannelParams, TransmittedFrame, transmit
from .constellation import Constellation, build_qam, map_bits
from .estimator import DEFAULT_WINDOW, StatePosterior, TrellisInputs, estimate, state_error_rate
from .ldpc import DEFAULT_DECODE_ITERS, DecodeResult, ParityCheckMatrix, decode_bp, deinterleave, interleave
from .likelihood import (
    LikelihoodParams,
    ba_symbol_logliks,
    baseline_symbol_logliks,
    bit_llrs,
    state_logliks,
    symbol_state_logliks,
)

SCHEMES = ("baseline", "ba", "iba")
FEEDBACK_MODES = ("aposteriori", "extrinsic", "none")

# Optimized (initial bias dB, outer-iteration bias dB) per QAM order.
DEFAULT_BIASES = {4: (-3.0, 0.0), 16: (-2.0, 5.0), 64: (-2.0, 5.0)}
DEFAULT_OUTER_ITERS = 3


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str
    estimator: str = "bcjr"
    bias_db: float = -2.0
    outer_bias_db: float | None = None
    outer_iterations: int = DEFAULT_OUTER_ITERS
    decode_iterations: int = DEFAULT_DECODE_ITERS
    decoder: str = "sum-product"
    # What the decoder hands back to the estimator in IBA: a-posteriori LLRs,
    # extrinsic LLRs, or nothing (uniform priors; a diagnostic mode).
    feedback: str = "aposteriori"
    span: int = DEFAULT_WINDOW

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.estimator not in ("va", "sova", "bcjr"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.outer_iterations < 1:
            raise ValueError("outer_iterations must be >= 1")
        if self.scheme == "iba" and self.outer_bias_db is None:
            raise ValueError("iba needs outer_bias_db")
        if self.feedback not in FEEDBACK_MODES:
            raise ValueError(f"unknown feedback mode {self.feedback!r}")

    @classmethod
    def for_modulation(cls, scheme: str, order: int, **overrides) -> "SchemeConfig":
        delta, delta_outer = DEFAULT_BIASES[order]
        kw = dict(scheme=scheme, bias_db=delta)
        if scheme == "iba":
            kw["outer_bias_db"] = delta_outer
        kw.update(overrides)
        return cls(**kw)

    @property
    def name(self) -> str:
        return self.scheme if self.scheme == "baseline" else f"{self.scheme}-{self.estimator}"


@dataclass(frozen=True)
class Link:
    code: ParityCheckMatrix
    constellation: Constellation
    channel: GeChannelParams
    interleaver_rows: int = 1024

    def __post_init__(self):
        if self.code.n % self.constellation.bits_per_symbol:
            raise ValueError(f"code length {self.code.n} is not a multiple of "
                             f"{self.constellation.bits_per_symbol} bits per symbol")

    @property
    def symbols_per_frame(self) -> int:
        return self.code.n // self.constellation.bits_per_symbol

    def with_channel(self, channel: GeChannelParams) -> "Link":
        return replace(self, channel=channel)


@dataclass
class Frame:
    info: np.ndarray
    codeword: np.ndarray
    tx: TransmittedFrame

    @property
    def y(self) -> np.ndarray:
        return self.tx.y

    @property
    def states(self) -> np.ndarray:
        return self.tx.data_states

    def digest(self) -> str:
        return hashlib.sha1(np.ascontiguousarray(self.tx.r).tobytes()).hexdigest()


@dataclass
class FrameResult:
    scheme: str
    info_hat: np.ndarray
    bit_errors: int
    error_positions: np.ndarray
    valid: bool
    diagnostics: list[dict] = field(default_factory=list)
    llrs: np.ndarray | None = None  # channel LLRs fed to the last decode, codeword order
    decoded: DecodeResult | None = None
    realization: str = ""


def simulate_frame(link: Link, rng: np.random.Generator) -> Frame:
    code = link.code
    info = rng.integers(0, 2, code.k, dtype=np.uint8)
    cw = code.encoder.encode(info)
    x = map_bits(interleave(cw, link.interleaver_rows), link.constellation)
    return Frame(info=info, codeword=cw, tx=transmit(x, link.channel, rng))


# ---------------------------------------------------------------------------


def _decode(channel_llrs: np.ndarray, cfg: SchemeConfig, link: Link) -> tuple[np.ndarray, DecodeResult]:
    llr_cw = deinterleave(channel_llrs.ravel(), link.interleaver_rows)
    output = "extrinsic" if cfg.feedback == "extrinsic" else "aposteriori"
    res = decode_bp(llr_cw, link.code, cfg.decode_iterations, variant=cfg.decoder, output=output)
    return llr_cw, res


def _finish(frame: Frame, cfg: SchemeConfig, link: Link, llr_cw, res: DecodeResult,
            diags: list[dict]) -> FrameResult:
    info_hat = link.code.encoder.extract(res.bits)
    pos = np.flatnonzero(info_hat != frame.info)
    return FrameResult(scheme=cfg.name, info_hat=info_hat, bit_errors=int(pos.size),
                       error_positions=pos, valid=res.valid, diagnostics=diags,
                       llrs=llr_cw, decoded=res, realization=frame.digest())


def _diag(iteration: int, llrs: np.ndarray, res: DecodeResult, post: StatePosterior | None,
          frame: Frame) -> dict:
    return {
        "outer_iteration": iteration,
        "state_error_rate": None if post is None else state_error_rate(post, frame.states),
        "mean_abs_llr": float(np.mean(np.abs(llrs))),
        "valid": res.valid,
        "decode_iterations": res.iterations,
    }


def baseline_llrs(y, cfg: SchemeConfig, link: Link) -> np.ndarray:
    sym = baseline_symbol_logliks(y, link.constellation, link.channel, cfg.bias_db)
    return bit_llrs(sym, link.constellation)


def ba_llrs(y, cfg: SchemeConfig, link: Link, bias_db: float, log_prior=None,
            posterior: StatePosterior | None = None) -> tuple[np.ndarray, StatePosterior]:
    """Estimator posteriors, burst-aware mixture and bit LLRs (channel bit order, (N, m))."""
    params = LikelihoodParams.from_channel(link.channel, bias_db)
    table = symbol_state_logliks(y, link.constellation, params)
    if posterior is None:
        inp = TrellisInputs.from_channel(state_logliks(table, log_prior), link.channel)
        posterior = estimate(cfg.estimator, inp, cfg.span)
    sym = ba_symbol_logliks(table, posterior.log_post)
    return bit_llrs(sym, link.constellation, log_prior), posterior


def run_baseline(frame: Frame, cfg: SchemeConfig, link: Link) -> FrameResult:
    llrs = baseline_llrs(frame.y, cfg, link)
    llr_cw, res = _decode(llrs, cfg, link)
    return _finish(frame, cfg, link, llr_cw, res, [_diag(1, llrs, res, None, frame)])


def run_ba(frame: Frame, cfg: SchemeConfig, link: Link,
           posterior: StatePosterior | None = None) -> FrameResult:
    """BA decoding; pass ``posterior`` to bypass the estimator (e.g. genie states)."""
    llrs, post = ba_llrs(frame.y, cfg, link, cfg.bias_db, posterior=posterior)
    llr_cw, res = _decode(llrs, cfg, link)
    return _finish(frame, cfg, link, llr_cw, res, [_diag(1, llrs, res, post, frame)])


def symbol_log_prior(decoder_llrs_channel_order: np.ndarray, c: Constellation) -> np.ndarray:
    """Normalized log P(x_k = c_j) from per-bit LLRs assuming independent bits, shape (N, M)."""
    L = decoder_llrs_channel_order.reshape(-1, c.bits_per_symbol)
    log_p0 = -np.logaddexp(0.0, -L)  # log of 1 / (1 + e^{-L})
    log_p1 = -np.logaddexp(0.0, L)
    lab = c.labels.astype(bool)  # (M, m)
    lp = np.where(lab[None, :, :], log_p1[:, None, :], log_p0[:, None, :]).sum(axis=2)
    return lp - logsumexp(lp, axis=1, keepdims=True)


def run_iba(frame: Frame, cfg: SchemeConfig, link: Link,
            posterior: StatePosterior | None = None) -> FrameResult:
    if cfg.outer_bias_db is None:
        raise ValueError("iba needs outer_bias_db")
    llrs, post = ba_llrs(frame.y, cfg, link, cfg.bias_db, posterior=posterior)
    llr_cw, res = _decode(llrs, cfg, link)
    diags = [_diag(1, llrs, res, post, frame)]
    for i in range(2, cfg.outer_iterations + 1):
        if res.valid:
            break
        if cfg.feedback == "none":
            log_prior = None
        else:
            fed = interleave(res.llrs, link.interleaver_rows)
            log_prior = symbol_log_prior(fed, link.constellation)
        llrs, post = ba_llrs(frame.y, cfg, link, cfg.outer_bias_db, log_prior, posterior=posterior)
        # fresh decoder each outer iteration
        llr_cw, res = _decode(llrs, cfg, link)
        diags.append(_diag(i, llrs, res, post, frame))
    return _finish(frame, cfg, link, llr_cw, res, diags)


_RUNNERS = {"baseline": run_baseline, "ba": run_ba, "iba": run_iba}


def run_scheme(frame: Frame, cfg: SchemeConfig, link: Link) -> FrameResult:
    return _RUNNERS[cfg.scheme](frame, cfg, link)


def make_link(order: int, code: ParityCheckMatrix, channel: GeChannelParams,
              interleaver_rows: int = 1024) -> Link:
    return Link(code=code, constellation=build_qam(order), channel=channel,
                interleaver_rows=interleaver_rows)
