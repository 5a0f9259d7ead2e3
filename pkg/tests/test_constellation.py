import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from burstldpc.constellation import (
    build_qam,
    demap_hard,
    demap_hard_bits,
    demap_hard_indices,
    map_bits,
)


@pytest.mark.parametrize("order", [4, 16, 64])
def test_unit_average_energy(order):
    c = build_qam(order)
    assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_qpsk_geometry():
    c = build_qam(4)
    expected = {complex(a, b) / np.sqrt(2) for a in (-1, 1) for b in (-1, 1)}
    got = {complex(np.round(p.real, 12), np.round(p.imag, 12)) for p in c.points}
    assert got == {complex(np.round(e.real, 12), np.round(e.imag, 12)) for e in expected}


def test_16qam_is_scaled_odd_grid():
    c = build_qam(16)
    grid = np.sort(np.unique(np.round(c.points.real * np.sqrt(10), 9)))
    assert np.allclose(grid, [-3, -1, 1, 3])


@pytest.mark.parametrize("order", [4, 16, 64])
def test_labels_are_a_bijection(order):
    c = build_qam(order)
    labels = {tuple(r) for r in c.labels}
    assert labels == set(itertools.product((0, 1), repeat=c.bits_per_symbol))


@pytest.mark.parametrize("order", [16, 64])
def test_gray_adjacency_exhaustive(order):
    c = build_qam(order)
    d = c.min_distance
    pairs = 0
    for i, j in itertools.combinations(range(order), 2):
        delta = c.points[j] - c.points[i]
        axis_adjacent = (np.isclose(abs(delta.real), d) and np.isclose(delta.imag, 0)) or (
            np.isclose(abs(delta.imag), d) and np.isclose(delta.real, 0))
        if axis_adjacent:
            pairs += 1
            assert np.sum(c.labels[i] != c.labels[j]) == 1
    side = int(np.sqrt(order))
    assert pairs == 2 * side * (side - 1)


def test_build_is_deterministic_and_cached():
    assert build_qam(16) is build_qam(16)


@pytest.mark.parametrize("order", [2, 8, 32, 256])
def test_unsupported_order(order):
    with pytest.raises(ValueError):
        build_qam(order)


def test_map_bits_string_and_length():
    c = build_qam(4)
    (x,) = map_bits("00", c)
    assert c.label_string(int(np.argmin(np.abs(c.points - x)))) == "00"
    bits = np.random.default_rng(0).integers(0, 2, 96)
    assert map_bits(bits, build_qam(64)).size == 16
    with pytest.raises(ValueError):
        map_bits("010", c)


@pytest.mark.parametrize("order", [4, 16, 64])
def test_round_trip_all_labels(order):
    c = build_qam(order)
    bits = c.labels.ravel()
    assert np.array_equal(demap_hard_bits(map_bits(bits, c), c), bits)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([4, 16, 64]), st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_round_trip_random(order, nsym, seed):
    c = build_qam(order)
    bits = np.random.default_rng(seed).integers(0, 2, nsym * c.bits_per_symbol)
    assert np.array_equal(demap_hard_bits(map_bits(bits, c), c), bits)


def test_demap_exact_point_and_tie():
    c = build_qam(16)
    for j, p in enumerate(c.points):
        assert demap_hard(p, c) == (j, c.label_string(j))
    # midpoint between two horizontally adjacent points goes to the lower index
    i, j = next((a, b) for a, b in itertools.combinations(range(16), 2)
                if np.isclose(abs(c.points[a] - c.points[b]), c.min_distance))
    mid = (c.points[i] + c.points[j]) / 2
    assert demap_hard(mid, c)[0] == min(i, j)


def test_small_perturbation_recovers_point():
    c = build_qam(64)
    rng = np.random.default_rng(1)
    idx = rng.integers(0, 64, 5000)
    r = 0.499 * c.min_distance * np.sqrt(rng.random(idx.size))
    y = c.points[idx] + r * np.exp(2j * np.pi * rng.random(idx.size))
    assert np.array_equal(demap_hard_indices(y, c), idx)
