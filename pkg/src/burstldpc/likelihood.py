"""State-conditioned BLT likelihoods, burst-aware mixtures and bit LLRs.

Everything is kept in the log domain; densities for the two GE states can be
hundreds of nats apart.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .channel import GeChannelParams, steady_state
from .constellation import Constellation

LLR_CLAMP = 40.0


@dataclass(frozen=True)
class LikelihoodParams:
    """Receiver-side model parameters.

    ``bias_db`` is an SNR offset: the likelihood assumes an effective AWGN
    variance of ``sigma2_awgn * 10**(-bias_db / 10)``, so a negative bias
    accounts for the noise enhancement of differential decoding.
    """

    sigma2_awgn: float
    sigma2_g: float
    sigma2_b: float
    bias_db: float = 0.0

    def __post_init__(self):
        if self.sigma2_eff <= 0:
            raise ValueError("effective AWGN variance must be positive")

    @classmethod
    def from_channel(cls, p: GeChannelParams, bias_db: float) -> "LikelihoodParams":
        return cls(sigma2_awgn=p.sigma2_awgn, sigma2_g=p.sigma2_g, sigma2_b=p.sigma2_b,
                   bias_db=bias_db)

    @property
    def bias(self) -> float:
        return 10.0 ** (self.bias_db / 10.0)

    @property
    def sigma2_eff(self) -> float:
        return self.sigma2_awgn / self.bias

    @property
    def state_variances(self) -> np.ndarray:
        return np.array([self.sigma2_g, self.sigma2_b])

    def with_bias(self, bias_db: float) -> "LikelihoodParams":
        return LikelihoodParams(self.sigma2_awgn, self.sigma2_g, self.sigma2_b, bias_db)


def blt_loglik(y, x, sigma2_z, sigma2_eff):
    """BLT approximation of log p(y | x, z) for y = x e^{jw} + n, w ~ N(0, sigma2_z).

    Broadcasts over all arguments. The trailing ``log(pi * sigma)`` constant is
    kept even though it cancels in every ratio we form.
    """
    y = np.asarray(y)
    x = np.asarray(x)
    s2 = sigma2_eff
    sum2 = np.abs(x + y) ** 2
    cross = np.imag(np.conj(x) * y)
    return (-np.abs(y - x) ** 2 / s2
            + 4.0 * sigma2_z / (2.0 * s2 ** 2 + s2 * sigma2_z * sum2) * cross ** 2
            - 0.5 * np.log(s2 + 0.5 * sigma2_z * sum2)
            + np.log(np.pi * np.sqrt(s2)))


def symbol_state_logliks(y, c: Constellation, params: LikelihoodParams) -> np.ndarray:
    """Table log p(y_k | c_j, z) of shape (N, M, 2).

    Erased slots (NaN observations) get a flat zero log-likelihood.
    """
    y = np.asarray(y, dtype=complex)
    erased = ~np.isfinite(y)
    yy = np.where(erased, 0.0, y)[:, None, None]
    table = blt_loglik(yy, c.points[None, :, None], params.state_variances[None, None, :],
                       params.sigma2_eff)
    table[erased] = 0.0
    return table


def uniform_log_prior(n: int, order: int) -> np.ndarray:
    return np.full((n, order), -np.log(order))


def marginal_loglik(y, sigma2_z, params: LikelihoodParams, c: Constellation, prior=None):
    """log sum_x P(x) p(y | x, z) for one state variance; prior is a probability vector."""
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    ll = blt_loglik(y[:, None], c.points[None, :], sigma2_z, params.sigma2_eff)
    if prior is None:
        log_prior = -np.log(c.order)
    else:
        with np.errstate(divide="ignore"):
            log_prior = np.log(np.asarray(prior, dtype=float))
    out = logsumexp(ll + log_prior, axis=-1)
    return out if out.size > 1 else float(out[0])


def state_logliks(table: np.ndarray, log_prior: np.ndarray | None = None) -> np.ndarray:
    """Per-slot log p(y_k | z) of shape (N, 2) from a symbol/state table."""
    if log_prior is None:
        log_prior = np.full(table.shape[:2], -np.log(table.shape[1]))
    return logsumexp(table + log_prior[:, :, None], axis=1)


def ba_symbol_logliks(table: np.ndarray, log_state_post: np.ndarray) -> np.ndarray:
    """Burst-aware mixture log p(y_k | x) = log sum_z P(z_k) p(y_k | x, z), shape (N, M)."""
    return np.logaddexp(table[:, :, 0] + log_state_post[:, None, 0],
                        table[:, :, 1] + log_state_post[:, None, 1])


def bit_llrs(symbol_logliks: np.ndarray, c: Constellation, log_prior: np.ndarray | None = None,
             clamp: float = LLR_CLAMP) -> np.ndarray:
    """Per-bit LLRs (positive favours bit 0), shape (N, bits_per_symbol), clamped to +-clamp."""
    metric = np.atleast_2d(symbol_logliks)
    if log_prior is not None:
        metric = metric + log_prior
    out = np.empty((metric.shape[0], c.bits_per_symbol))
    for m in range(c.bits_per_symbol):
        zero, one = c.bit_sets(m)
        out[:, m] = logsumexp(metric[:, zero], axis=1) - logsumexp(metric[:, one], axis=1)
    # Slots whose metrics are all equal (erasures) yield exact zeros here.
    return np.clip(np.nan_to_num(out, nan=0.0), -clamp, clamp)


def effective_variance(p: GeChannelParams) -> float:
    pg, pb = steady_state(p)
    return pg * p.sigma2_g + pb * p.sigma2_b


def baseline_symbol_logliks(y, c: Constellation, p: GeChannelParams, bias_db: float) -> np.ndarray:
    """Memoryless single-state likelihoods using the steady-state averaged innovation variance."""
    y = np.asarray(y, dtype=complex)
    erased = ~np.isfinite(y)
    yy = np.where(erased, 0.0, y)
    ll = blt_loglik(yy[:, None], c.points[None, :], effective_variance(p),
                    p.sigma2_awgn / bias_db_to_linear(bias_db))
    ll[erased] = 0.0
    return ll


def bias_db_to_linear(bias_db: float) -> float:
    return 10.0 ** (bias_db / 10.0)
