"""Shared fixtures: toy codes and the paired Monte Carlo runs reused by several tests."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import pytest

from burstldpc.channel import REFERENCE_PARAMS, GeChannelParams, frame_rng
from burstldpc.estimator import StatePosterior
from burstldpc.ldpc import ParityCheckMatrix, load_code
from burstldpc.pipeline import SchemeConfig, make_link, run_ba, run_scheme, simulate_frame

SCHEME_CODE = "regular-3-18-1944"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def hamming_like():
    # n=6, k=3 toy code with a small enough codebook for brute-force ML.
    return ParityCheckMatrix.from_dense([[1, 1, 0, 1, 0, 0],
                                         [0, 1, 1, 0, 1, 0],
                                         [1, 0, 1, 0, 0, 1]])


@pytest.fixture(scope="session")
def tree_code():
    # Checks share at most one variable and the Tanner graph is a tree.
    return ParityCheckMatrix.from_dense([[1, 1, 1, 0, 0, 0, 0, 0],
                                         [0, 0, 1, 1, 1, 0, 0, 0],
                                         [0, 0, 0, 0, 1, 1, 1, 0],
                                         [0, 1, 0, 0, 0, 0, 0, 1]])


@dataclass
class PairedRun:
    """Per-frame outcomes of several receivers on identical channel realizations."""

    k: int
    errors: dict  # name -> (F,) bit errors
    positions: dict  # name -> list of error-position arrays
    seconds: float

    @property
    def frames(self) -> int:
        return next(iter(self.errors.values())).size

    def __repr__(self) -> str:
        rates = ", ".join(f"{n}={self.ber(n):.3e}" for n in self.errors)
        return f"PairedRun(frames={self.frames}, BER: {rates})"

    def ber(self, name: str) -> float:
        return self.errors[name].sum() / (self.frames * self.k)

    def packet_errors_per_frame(self, name: str, packet_bits: int = 512) -> np.ndarray:
        """Errored packets of the concatenated stream, each charged to the frame holding its first bit."""
        errored = set()
        for f, pos in enumerate(self.positions[name]):
            errored.update(((f * self.k + np.asarray(pos)) // packet_bits).tolist())
        complete = self.frames * self.k // packet_bits
        owner = (np.arange(complete) * packet_bits) // self.k
        hit = np.array([p in errored for p in range(complete)])
        return np.bincount(owner[hit], minlength=self.frames)

    def per(self, name: str, packet_bits: int = 512) -> float:
        return self.packet_errors_per_frame(name, packet_bits).sum() / (
            self.frames * self.k // packet_bits)


def paired_run(order: int, snr_db: float, frames: int, seed: int, genie: bool = False,
               code: str = SCHEME_CODE, **channel) -> PairedRun:
    params = dict(REFERENCE_PARAMS, **channel)
    link = make_link(order, load_code(code), GeChannelParams.from_snr_db(snr_db, **params))
    cfgs = {s: SchemeConfig.for_modulation(s, order) for s in ("baseline", "ba", "iba")}
    errors = {name: [] for name in [*cfgs, *(["genie"] if genie else [])]}
    positions = {name: [] for name in errors}
    t0 = time.perf_counter()
    for f in range(frames):
        frame = simulate_frame(link, frame_rng(seed, f))
        results = {name: run_scheme(frame, cfg, link) for name, cfg in cfgs.items()}
        if genie:
            results["genie"] = run_ba(frame, cfgs["ba"], link,
                                      posterior=StatePosterior.from_states(frame.states))
        for name, res in results.items():
            errors[name].append(res.bit_errors)
            positions[name].append(res.error_positions)
    return PairedRun(k=link.code.k, errors={n: np.array(v) for n, v in errors.items()},
                     positions=positions, seconds=time.perf_counter() - t0)


@pytest.fixture(scope="session")
def ordering_run():
    """16QAM, paper channel, 16 dB: the operating point of the scheme-ordering checks."""
    return paired_run(16, 16.0, frames=1000, seed=2025, genie=True)


@pytest.fixture(scope="session")
def severe_run():
    """16QAM, sigma_B^2 = 1, 15 dB stress configuration."""
    return paired_run(16, 15.0, frames=500, seed=2026, sigma2_b=1.0)


# ---------------------------------------------------------------------------
# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary

_CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    def record(number: int, ok: bool, detail: str) -> bool:
        _CRITERIA[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
