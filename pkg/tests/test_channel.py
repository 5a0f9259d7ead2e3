import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from burstldpc.channel import (
    BAD,
    GOOD,
    REFERENCE_PARAMS,
    GeChannelParams,
    apply_channel,
    diff_decode,
    diff_encode,
    frame_rng,
    mean_durations,
    sample_phase,
    sample_states,
    snr_db_to_sigma2,
    steady_state,
    transmit,
)
from burstldpc.constellation import build_qam


def params(**kw):
    base = dict(REFERENCE_PARAMS, sigma2_awgn=0.01)
    base.update(kw)
    return GeChannelParams(**base)


def bad_runs(states):
    """Lengths of complete B runs (runs touching either end are dropped)."""
    s = np.concatenate(([GOOD], states, [GOOD])).astype(int)
    edges = np.diff(s)
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    runs = stops - starts
    keep = (starts > 0) & (stops < states.size)
    return runs[keep]


def test_steady_state_examples():
    assert steady_state(params(p_gb=0.1, p_bg=0.1)) == pytest.approx((0.5, 0.5))
    pg, pb = steady_state(params())
    assert pg == pytest.approx(0.02 / 0.0202, rel=1e-12)
    assert pg == pytest.approx(0.990099, abs=1e-6)
    assert pb == pytest.approx(0.009901, abs=1e-6)
    assert steady_state(params(p_gb=1e-12))[0] == pytest.approx(1.0, abs=1e-9)


def test_mean_durations():
    assert mean_durations(params(p_bg=1e-2))[1] == pytest.approx(100)
    assert mean_durations(params(p_gb=5e-4))[0] == pytest.approx(2000)
    assert mean_durations(params(p_gb=1.0))[0] == 1.0


def test_params_validation():
    with pytest.raises(ValueError):
        params(sigma2_g=0.2, sigma2_b=0.1)
    with pytest.raises(ValueError):
        params(p_gb=0.0, p_bg=0.0)
    with pytest.raises(ValueError):
        params(p_gb=1.5)
    with pytest.raises(ValueError):
        params(sigma2_awgn=-1.0)
    p = GeChannelParams.from_snr_db(15.0, **REFERENCE_PARAMS)
    assert p.snr_db == pytest.approx(15.0)
    assert p.sigma2_awgn == pytest.approx(10 ** -1.5)
    assert np.allclose(p.transition_matrix().sum(axis=1), 1.0, atol=1e-12)


def test_absorbing_good_state():
    z = sample_states(10_000, params(p_gb=0.0), np.random.default_rng(0), initial=GOOD)
    assert not z.any()


def test_state_fraction_markov_interval():
    # The chain is positively correlated, so the binomial variance is
    # inflated by (1 + lam) / (1 - lam) with lam = 1 - p_gb - p_bg.
    p = params()
    n = 10**6
    z = sample_states(n, p, np.random.default_rng(0))
    pb = steady_state(p)[1]
    lam = 1 - p.p_gb - p.p_bg
    sd = np.sqrt(pb * (1 - pb) / n * (1 + lam) / (1 - lam))
    assert abs(z.mean() - pb) < 3 * sd


def test_state_fraction_many_short_frames():
    # Fresh steady-state draws at every frame start make short frames nearly
    # independent, so the plain binomial interval applies.
    p = params(p_gb=0.2, p_bg=0.3)
    rng = np.random.default_rng(1)
    z = np.concatenate([sample_states(1, p, rng) for _ in range(20_000)])
    pb = steady_state(p)[1]
    assert abs(z.mean() - pb) < 3 * np.sqrt(pb * (1 - pb) / z.size)


def test_bad_run_length_geometric():
    p = params()
    z = sample_states(10**7, p, np.random.default_rng(2))
    runs = bad_runs(z)
    # geometric oracle: mean 1/p, sd sqrt(1-p)/p
    se = np.sqrt(1 - p.p_bg) / p.p_bg / np.sqrt(runs.size)
    assert abs(runs.mean() - 50.0) < 3 * se
    assert abs(runs.mean() - 50.0) < 0.05 * 50.0


def test_good_run_length_geometric():
    p = params(p_gb=5e-3)
    z = sample_states(10**6, p, np.random.default_rng(3))
    goods = bad_runs(1 - z)
    se = np.sqrt(1 - p.p_gb) / p.p_gb / np.sqrt(goods.size)
    assert abs(goods.mean() - 200.0) < 3 * se


def test_states_match_stepwise_chain_statistics():
    # Compare the run-length sampler with a naive slot-by-slot simulation.
    p = params(p_gb=0.05, p_bg=0.2)
    rng = np.random.default_rng(4)
    n = 200_000
    fast = sample_states(n, p, rng)
    slow = np.empty(n, dtype=np.int8)
    s = GOOD
    u = rng.random(n)
    for i in range(n):
        s = (BAD if u[i] < p.p_gb else GOOD) if s == GOOD else (GOOD if u[i] < p.p_bg else BAD)
        slow[i] = s
    trans = lambda z: np.mean(z[1:][z[:-1] == GOOD] == BAD)  # noqa: E731
    assert trans(fast) == pytest.approx(trans(slow), abs=0.005)
    assert fast.mean() == pytest.approx(slow.mean(), abs=0.01)


def test_phase_zero_variance():
    p = params(sigma2_g=0.0, sigma2_b=0.0)
    z = sample_states(1000, p, np.random.default_rng(0))
    real = sample_phase(z, p, np.random.default_rng(0))
    assert not real.phases.any()


def test_phase_recursion_exact():
    p = params()
    real = sample_phase(sample_states(5000, p, np.random.default_rng(5)), p,
                        np.random.default_rng(6))
    assert real.phases[0] == 0.0
    assert len(real.states) == len(real.phases) == len(real.innovations)
    assert np.array_equal(np.diff(real.phases), real.innovations[1:])


def test_bad_state_innovation_variance():
    p = params(sigma2_b=0.12)
    z = np.full(40_000, BAD, dtype=np.int8)
    real = sample_phase(z, p, np.random.default_rng(7))
    assert np.var(real.innovations[1:]) == pytest.approx(0.12, rel=0.05)


def test_innovations_uncorrelated():
    p = params()
    z = sample_states(10**6, p, np.random.default_rng(8))
    real = sample_phase(z, p, np.random.default_rng(9))
    u = real.innovations[1:] / np.sqrt(p.state_variances[z[1:]])
    u = u - u.mean()
    bound = 3 / np.sqrt(u.size)
    for lag in range(1, 6):
        rho = np.dot(u[:-lag], u[lag:]) / np.dot(u, u)
        assert abs(rho) < bound


def test_diff_encode_basics(rng):
    s = diff_encode(np.ones(10))
    assert s.size == 11 and np.allclose(s, 1.0)
    c = build_qam(16)
    x = c.points[rng.integers(0, 16, 500)]
    s = diff_encode(x)
    assert np.allclose(np.abs(s[1:]), np.abs(x), atol=1e-12)
    with pytest.raises(ValueError):
        diff_encode(x, s_ref=0.0)


def test_apply_channel_identity_and_errors(rng):
    p = params(sigma2_g=0.0, sigma2_b=0.0, sigma2_awgn=0.0)
    s = diff_encode(build_qam(4).points[rng.integers(0, 4, 50)])
    real = sample_phase(sample_states(s.size, p, rng), p, rng)
    assert np.array_equal(apply_channel(s, real, p, rng), s)
    with pytest.raises(ValueError):
        apply_channel(s[:-1], real, p, rng)


def test_noise_power():
    p = params(sigma2_awgn=0.05)
    rng = np.random.default_rng(10)
    n = 10**6
    s = np.ones(n, dtype=complex)
    real = sample_phase(sample_states(n, p, rng), p, rng)
    noise = apply_channel(s, real, p, rng) - s * np.exp(1j * real.phases)
    assert np.mean(np.abs(noise) ** 2) == pytest.approx(0.05, rel=0.02)
    assert np.var(noise.real) == pytest.approx(0.025, rel=0.02)
    assert np.var(noise.imag) == pytest.approx(0.025, rel=0.02)


@pytest.mark.parametrize("order", [4, 16, 64])
def test_noiseless_round_trip(order, rng):
    c = build_qam(order)
    x = c.points[rng.integers(0, order, 1000)]
    y = diff_decode(diff_encode(x))
    assert y.size == x.size
    assert np.allclose(np.abs(y), np.abs(x), atol=1e-12)
    dphi = np.angle(y * np.conj(x))
    assert np.max(np.abs(dphi)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_noiseless_phase_noise_shifts_angle(seed, s2b):
    rng = np.random.default_rng(seed)
    p = params(sigma2_b=max(s2b, REFERENCE_PARAMS["sigma2_g"]), sigma2_awgn=0.0, p_gb=0.05, p_bg=0.1)
    c = build_qam(16)
    x = c.points[rng.integers(0, 16, 200)]
    s = diff_encode(x)
    real = sample_phase(sample_states(s.size, p, rng), p, rng)
    y = diff_decode(apply_channel(s, real, p, rng))
    err = np.angle(y * np.conj(x) * np.exp(-1j * real.innovations[1:]))
    assert np.max(np.abs(err)) < 1e-9


def test_diff_decode_erasure_and_length():
    y = diff_decode(np.array([1.0, 0.0, 1j, 2.0]))
    assert y.size == 3
    assert np.isnan(y[1]) and np.isfinite(y[0]) and np.isfinite(y[2])
    with pytest.raises(ValueError):
        diff_decode(np.array([1.0]))


def test_good_state_differential_phase_moments():
    p = GeChannelParams.from_snr_db(60.0, **REFERENCE_PARAMS)
    rng = np.random.default_rng(11)
    c = build_qam(16)
    x = c.points[rng.integers(0, 16, 200_000)]
    tx = transmit(x, p, rng)
    good = tx.data_states == GOOD
    dphi = np.angle(tx.y * np.conj(x))[good]
    assert abs(dphi.mean()) < 0.1 * np.sqrt(p.sigma2_g)
    assert np.var(dphi) == pytest.approx(p.sigma2_g, rel=0.10)


def test_transmit_shapes_and_frame_rng():
    p = GeChannelParams.from_snr_db(15.0, **REFERENCE_PARAMS)
    x = build_qam(16).points[:8]
    a = transmit(x, p, frame_rng(3, 7))
    b = transmit(x, p, frame_rng(3, 7))
    c = transmit(x, p, frame_rng(3, 8))
    assert a.s.size == a.r.size == 9 and a.y.size == 8 and a.data_states.size == 8
    assert np.array_equal(a.r, b.r)
    assert not np.array_equal(a.r, c.r)
    assert snr_db_to_sigma2(10.0) == pytest.approx(0.1)
