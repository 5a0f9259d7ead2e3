"""Gilbert-Elliott modulated Wiener phase noise, AWGN and phase-domain differential coding."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GOOD, BAD = 0, 1


@dataclass(frozen=True)
class GeChannelParams:
    """Channel knobs. Variances of the phase innovations are in rad^2;
    ``sigma2_awgn`` is the total complex noise variance for unit symbol energy."""

    p_gb: float
    p_bg: float
    sigma2_g: float
    sigma2_b: float
    sigma2_awgn: float

    def __post_init__(self):
        if not (0.0 <= self.p_gb <= 1.0 and 0.0 <= self.p_bg <= 1.0):
            raise ValueError("transition probabilities must lie in [0, 1]")
        if self.p_gb + self.p_bg <= 0.0:
            raise ValueError("p_gb and p_bg cannot both be zero")
        if self.sigma2_g < 0 or self.sigma2_b < self.sigma2_g:
            raise ValueError("need 0 <= sigma2_g <= sigma2_b")
        if self.sigma2_awgn < 0:
            raise ValueError("sigma2_awgn must be non-negative")

    @classmethod
    def from_snr_db(cls, snr_db: float, *, p_gb: float, p_bg: float, sigma2_g: float,
                    sigma2_b: float) -> "GeChannelParams":
        return cls(p_gb=p_gb, p_bg=p_bg, sigma2_g=sigma2_g, sigma2_b=sigma2_b,
                   sigma2_awgn=snr_db_to_sigma2(snr_db))

    @property
    def snr_db(self) -> float:
        return float(-10.0 * np.log10(self.sigma2_awgn))

    @property
    def state_variances(self) -> np.ndarray:
        return np.array([self.sigma2_g, self.sigma2_b])

    def transition_matrix(self) -> np.ndarray:
        return np.array([[1.0 - self.p_gb, self.p_gb],
                         [self.p_bg, 1.0 - self.p_bg]])


# Reference operating point shared by most experiments.
REFERENCE_PARAMS = dict(sigma2_g=3e-4, sigma2_b=0.12, p_gb=2e-4, p_bg=2e-2)


def snr_db_to_sigma2(snr_db: float) -> float:
    # Es = 1
    return float(10.0 ** (-snr_db / 10.0))


def steady_state(p: GeChannelParams) -> tuple[float, float]:
    pg = p.p_bg / (p.p_bg + p.p_gb)
    return pg, 1.0 - pg


def mean_durations(p: GeChannelParams) -> tuple[float, float]:
    lg = np.inf if p.p_gb == 0 else 1.0 / p.p_gb
    lb = np.inf if p.p_bg == 0 else 1.0 / p.p_bg
    return lg, lb


@dataclass(frozen=True)
class ChannelRealization:
    states: np.ndarray  # (n,) int8, GOOD/BAD
    phases: np.ndarray  # (n,) rad
    innovations: np.ndarray  # (n,) rad, innovations[0] == phases[0] == 0

    def __len__(self) -> int:
        return len(self.states)


def frame_rng(master_seed: int, frame_index: int) -> np.random.Generator:
    """Independent generator per frame: SeedSequence hashes (master_seed, frame_index)."""
    return np.random.default_rng([int(master_seed), int(frame_index)])


def sample_states(n: int, p: GeChannelParams, rng: np.random.Generator,
                  initial: int | None = None) -> np.ndarray:
    """Draw a GE state sequence by alternating geometric sojourn times.

    A first-order chain that leaves state G with probability ``p_gb`` per slot
    stays there for a Geometric(p_gb) number of slots, so sampling run lengths
    is exactly equivalent to stepping the chain and far faster.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if initial is None:
        initial = BAD if rng.random() < steady_state(p)[1] else GOOD
    leave = (p.p_gb, p.p_bg)
    states = np.empty(n, dtype=np.int8)
    pos, state = 0, int(initial)
    while pos < n:
        q = leave[state]
        run = n - pos if q == 0.0 else int(rng.geometric(q))
        states[pos:pos + run] = state
        pos += run
        state ^= 1
    return states


def sample_phase(states: np.ndarray, p: GeChannelParams,
                 rng: np.random.Generator) -> ChannelRealization:
    states = np.asarray(states, dtype=np.int8)
    if states.size == 0:
        raise ValueError("states must be nonempty")
    sd = np.sqrt(p.state_variances)[states]
    w = rng.standard_normal(states.size) * sd
    w[0] = 0.0  # theta_0 = 0
    phases = np.cumsum(w)
    # Recompute innovations from the phases so the difference identity holds bit-exactly.
    innovations = np.concatenate(([0.0], np.diff(phases)))
    return ChannelRealization(states=states, phases=phases, innovations=innovations)


def diff_encode(x, s_ref: complex = 1.0) -> np.ndarray:
    """Phase-domain differential encoding; the reference is prepended as a pilot."""
    if abs(s_ref) == 0:
        raise ValueError("differential reference must be nonzero")
    x = np.asarray(x, dtype=complex)
    rot = np.angle(s_ref) + np.concatenate(([0.0], np.cumsum(np.angle(x))[:-1]))
    rot = np.mod(rot, 2 * np.pi)
    return np.concatenate(([complex(s_ref)], x * np.exp(1j * rot)))


def apply_channel(s, realization: ChannelRealization, p: GeChannelParams,
                  rng: np.random.Generator) -> np.ndarray:
    s = np.asarray(s, dtype=complex)
    if s.size != len(realization):
        raise ValueError(f"signal length {s.size} != realization length {len(realization)}")
    sd = np.sqrt(p.sigma2_awgn / 2)
    noise = sd * (rng.standard_normal(s.size) + 1j * rng.standard_normal(s.size))
    return s * np.exp(1j * realization.phases) + noise


def diff_decode(r) -> np.ndarray:
    """Differential decoding; the pilot slot is consumed.

    A slot whose predecessor has zero magnitude has no phase reference and is
    returned as NaN (an erasure); the likelihood layer assigns it a flat density.
    """
    r = np.asarray(r, dtype=complex)
    if r.size < 2:
        raise ValueError("need at least the pilot and one data sample")
    prev = r[:-1]
    mag = np.abs(prev)
    with np.errstate(invalid="ignore", divide="ignore"):
        y = r[1:] * np.conj(prev) / mag
    y[mag == 0] = np.nan
    return y


@dataclass
class TransmittedFrame:
    """Everything one channel frame produces, kept for diagnostics and genie runs."""

    x: np.ndarray
    s: np.ndarray
    r: np.ndarray
    y: np.ndarray
    realization: ChannelRealization

    @property
    def data_states(self) -> np.ndarray:
        return self.realization.states[1:]


def transmit(x, p: GeChannelParams, rng: np.random.Generator) -> TransmittedFrame:
    """Pilot-prefixed differential encoding, bursty channel and differential decoding."""
    s = diff_encode(x)
    states = sample_states(s.size, p, rng)
    real = sample_phase(states, p, rng)
    r = apply_channel(s, real, p, rng)
    return TransmittedFrame(x=np.asarray(x, dtype=complex), s=s, r=r, y=diff_decode(r),
                            realization=real)
