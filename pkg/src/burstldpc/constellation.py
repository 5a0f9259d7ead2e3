"""Gray-labeled square QAM alphabets and bit/symbol mapping."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SUPPORTED_ORDERS = (4, 16, 64)


@dataclass(frozen=True, eq=False)
class Constellation:
    """M-QAM alphabet with unit average energy.

    Point ``j`` carries the label whose binary expansion (MSB first) is ``j``,
    so ``labels[j]`` is simply the bit vector of ``j``. The first half of the
    label selects the in-phase level, the second half the quadrature level,
    each through a reflected binary Gray code.
    """

    order: int
    points: np.ndarray  # (M,) complex
    labels: np.ndarray  # (M, bits_per_symbol) uint8

    @property
    def bits_per_symbol(self) -> int:
        return self.labels.shape[1]

    @property
    def min_distance(self) -> float:
        d = np.abs(self.points[:, None] - self.points[None, :])
        return float(d[d > 0].min())

    def label_string(self, j: int) -> str:
        return "".join(str(b) for b in self.labels[j])

    def bit_sets(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """Indices of the points whose m-th bit is 0 and 1."""
        col = self.labels[:, m]
        return np.flatnonzero(col == 0), np.flatnonzero(col == 1)


def _gray_to_binary(g: int) -> int:
    b = 0
    while g:
        b ^= g
        g >>= 1
    return b


@lru_cache(maxsize=None)
def build_qam(order: int) -> Constellation:
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported QAM order {order}; expected one of {SUPPORTED_ORDERS}")
    bps = int(np.log2(order))
    half = bps // 2
    side = 1 << half
    # Level index i sits at amplitude 2i - (side - 1) and is labeled gray(i).
    amp = np.empty(order)
    quad = np.empty(order)
    for j in range(order):
        gi, gq = j >> half, j & (side - 1)
        amp[j] = 2 * _gray_to_binary(gi) - (side - 1)
        quad[j] = 2 * _gray_to_binary(gq) - (side - 1)
    points = amp + 1j * quad
    points = points / np.sqrt(np.mean(np.abs(points) ** 2))
    labels = ((np.arange(order)[:, None] >> np.arange(bps - 1, -1, -1)) & 1).astype(np.uint8)
    points.setflags(write=False)
    labels.setflags(write=False)
    return Constellation(order=order, points=points, labels=labels)


def bits_to_indices(bits, c: Constellation) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64).ravel()
    bps = c.bits_per_symbol
    if bits.size % bps:
        raise ValueError(f"bit count {bits.size} is not a multiple of {bps}")
    weights = 1 << np.arange(bps - 1, -1, -1)
    return bits.reshape(-1, bps) @ weights


def map_bits(bits, c: Constellation) -> np.ndarray:
    """Map a bit sequence (array or '0101' string) to constellation points."""
    if isinstance(bits, str):
        bits = [int(ch) for ch in bits]
    return c.points[bits_to_indices(bits, c)]


def demap_hard_indices(y, c: Constellation) -> np.ndarray:
    """Minimum-distance symbol indices; ``argmin`` resolves ties to the lowest index."""
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    return np.argmin(np.abs(y[:, None] - c.points[None, :]), axis=1)


def demap_hard(y: complex, c: Constellation) -> tuple[int, str]:
    j = int(demap_hard_indices(y, c)[0])
    return j, c.label_string(j)


def demap_hard_bits(y, c: Constellation) -> np.ndarray:
    return c.labels[demap_hard_indices(y, c)].ravel()
