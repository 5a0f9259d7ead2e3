"""LDPC codes: alist I/O, GF(2) encoding, sum-product decoding and the block interleaver."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import sparse

DEFAULT_DECODE_ITERS = 15


class AlistError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


class RankDeficientError(ValueError):
    def __init__(self, rank: int, m: int):
        self.rank = rank
        super().__init__(f"parity-check matrix has rank {rank} < {m} rows")


class ParityCheckMatrix:
    """Sparse binary H given by its (check, variable) edge list."""

    def __init__(self, n: int, m: int, checks, variables):
        chk = np.asarray(checks, dtype=np.int64)
        var = np.asarray(variables, dtype=np.int64)
        if chk.shape != var.shape:
            raise ValueError("edge arrays differ in length")
        if chk.size and (chk.min() < 0 or chk.max() >= m or var.min() < 0 or var.max() >= n):
            raise ValueError("edge index out of range")
        order = np.lexsort((var, chk))
        chk, var = chk[order], var[order]
        if chk.size > 1 and np.any((np.diff(chk) == 0) & (np.diff(var) == 0)):
            raise ValueError("duplicate edge in H")
        self.n, self.m = int(n), int(m)
        self.edge_check = chk
        self.edge_var = var
        for arr in (chk, var):
            arr.setflags(write=False)

    @classmethod
    def from_dense(cls, h) -> "ParityCheckMatrix":
        h = np.asarray(h)
        chk, var = np.nonzero(h % 2)
        return cls(h.shape[1], h.shape[0], chk, var)

    def dense(self) -> np.ndarray:
        h = np.zeros((self.m, self.n), dtype=np.uint8)
        h[self.edge_check, self.edge_var] = 1
        return h

    @property
    def num_edges(self) -> int:
        return self.edge_check.size

    @cached_property
    def row_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_check, minlength=self.m)

    @cached_property
    def col_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_var, minlength=self.n)

    def rows(self) -> list[np.ndarray]:
        bounds = np.concatenate(([0], np.cumsum(self.row_degrees)))
        return [self.edge_var[bounds[i]:bounds[i + 1]] for i in range(self.m)]

    def cols(self) -> list[np.ndarray]:
        order = np.lexsort((self.edge_check, self.edge_var))
        chk = self.edge_check[order]
        bounds = np.concatenate(([0], np.cumsum(self.col_degrees)))
        return [chk[bounds[j]:bounds[j + 1]] for j in range(self.n)]

    @cached_property
    def encoder(self) -> "SystematicEncoder":
        return SystematicEncoder.from_matrix(self)

    @property
    def k(self) -> int:
        return self.n - self.encoder.rank

    @property
    def rate(self) -> float:
        return self.k / self.n

    def syndrome(self, bits) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64)
        return np.bincount(self.edge_check, weights=bits[self.edge_var], minlength=self.m).astype(np.int64) % 2

    def is_codeword(self, bits) -> bool:
        return not self.syndrome(bits).any()

    def has_four_cycles(self) -> bool:
        h = sparse.csr_matrix((np.ones(self.num_edges, dtype=np.int32),
                               (self.edge_check, self.edge_var)), shape=(self.m, self.n))
        overlap = sparse.triu(h @ h.T, k=1)
        return bool((overlap.data > 1).any())

    def __repr__(self) -> str:
        return f"ParityCheckMatrix(n={self.n}, m={self.m}, edges={self.num_edges})"


# ---------------------------------------------------------------------------
# alist format


def load_alist(text: str) -> ParityCheckMatrix:
    """Parse MacKay's alist format. Zero padding in the index lists is optional."""
    lines = [(i + 1, ln.split()) for i, ln in enumerate(text.splitlines())]
    lines = [(no, toks) for no, toks in lines if toks]
    cursor = iter(lines)

    def ints(expected: int | None, what: str):
        try:
            no, toks = next(cursor)
        except StopIteration:
            raise AlistError(f"unexpected end of file while reading {what}") from None
        try:
            vals = [int(t) for t in toks]
        except ValueError:
            raise AlistError(f"non-integer token in {what}", no) from None
        if expected is not None and len(vals) != expected:
            raise AlistError(f"{what}: expected {expected} values, got {len(vals)}", no)
        return no, vals

    no, (n, m) = ints(2, "header")
    if n <= 0 or m <= 0:
        raise AlistError("matrix dimensions must be positive", no)
    no, (max_col, max_row) = ints(2, "maximum degrees")
    no_cd, col_deg = ints(n, "column degrees")
    no_rd, row_deg = ints(m, "row degrees")
    if max(col_deg) != max_col or max(row_deg) != max_row:
        raise AlistError("maximum degree does not match degree lists", no)
    if sum(col_deg) != sum(row_deg):
        raise AlistError("column and row degree totals differ", no_rd)

    col_sets = []
    for j in range(n):
        no, vals = ints(None, f"column {j + 1}")
        idx = [v for v in vals if v != 0]
        if len(idx) != col_deg[j]:
            raise AlistError(f"column {j + 1} lists {len(idx)} entries, degree says {col_deg[j]}", no)
        if any(v < 1 or v > m for v in idx):
            raise AlistError(f"row index out of range in column {j + 1}", no)
        if len(set(idx)) != len(idx):
            raise AlistError(f"repeated row index in column {j + 1}", no)
        col_sets.append(idx)
    row_sets = []
    for i in range(m):
        no, vals = ints(None, f"row {i + 1}")
        idx = [v for v in vals if v != 0]
        if len(idx) != row_deg[i]:
            raise AlistError(f"row {i + 1} lists {len(idx)} entries, degree says {row_deg[i]}", no)
        if any(v < 1 or v > n for v in idx):
            raise AlistError(f"column index out of range in row {i + 1}", no)
        row_sets.append(idx)

    from_cols = {(r - 1, j) for j, rows in enumerate(col_sets) for r in rows}
    from_rows = {(i, c - 1) for i, cols in enumerate(row_sets) for c in cols}
    if from_cols != from_rows:
        raise AlistError("column view and row view describe different matrices")
    chk, var = zip(*sorted(from_cols)) if from_cols else ((), ())
    return ParityCheckMatrix(n, m, chk, var)


def write_alist(h: ParityCheckMatrix) -> str:
    """Canonical alist text: single spaces, zero-padded index lists, 1-based indices."""
    cd, rd = h.col_degrees, h.row_degrees
    max_c, max_r = int(cd.max()), int(rd.max())
    out = [f"{h.n} {h.m}", f"{max_c} {max_r}",
           " ".join(map(str, cd)), " ".join(map(str, rd))]
    for rows in h.cols():
        vals = list(rows + 1) + [0] * (max_c - len(rows))
        out.append(" ".join(map(str, vals)))
    for cols in h.rows():
        vals = list(cols + 1) + [0] * (max_r - len(cols))
        out.append(" ".join(map(str, vals)))
    return "\n".join(out) + "\n"


def read_alist_file(path) -> ParityCheckMatrix:
    return load_alist(Path(path).read_text())


BUILTIN_CODES = {
    "regular-3-6-1944": "regular_3_6_1944.alist",
    "regular-3-18-1944": "regular_3_18_1944.alist",
    "regular-3-18-17664": "regular_3_18_17664.alist",
}


@lru_cache(maxsize=None)
def load_builtin(name: str) -> ParityCheckMatrix:
    try:
        fname = BUILTIN_CODES[name]
    except KeyError:
        raise ValueError(f"unknown builtin code {name!r}; have {sorted(BUILTIN_CODES)}") from None
    return load_alist(resources.files("burstldpc.data").joinpath(fname).read_text())


def load_code(spec: str) -> ParityCheckMatrix:
    """A builtin code name or a path to an alist file."""
    if spec in BUILTIN_CODES:
        return load_builtin(spec)
    return _load_path_cached(str(Path(spec).resolve()))


@lru_cache(maxsize=8)
def _load_path_cached(path: str) -> ParityCheckMatrix:
    return read_alist_file(path)


# ---------------------------------------------------------------------------
# GF(2) encoding


def _pack_rows(a: np.ndarray) -> np.ndarray:
    """Pack a 0/1 matrix into little-endian uint64 words per row."""
    a = np.asarray(a, dtype=np.uint8) % 2
    pad = (-a.shape[1]) % 64
    packed = np.packbits(np.pad(a, ((0, 0), (0, pad))), axis=1, bitorder="little")
    return np.ascontiguousarray(packed).view(np.uint64)


def _unpack_rows(words: np.ndarray, ncols: int) -> np.ndarray:
    bits = np.unpackbits(np.ascontiguousarray(words).view(np.uint8), axis=1, bitorder="little")
    return bits[:, :ncols]


def gf2_rref(a: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2) and the pivot columns."""
    a = np.asarray(a)
    rows, cols = a.shape
    r = _pack_rows(a)
    pivots = []
    row = 0
    for col in range(cols):
        if row == rows:
            break
        word, bit = divmod(col, 64)
        colbits = (r[:, word] >> np.uint64(bit)) & np.uint64(1)
        hits = np.flatnonzero(colbits[row:]) + row
        if hits.size == 0:
            continue
        p = hits[0]
        if p != row:
            r[[row, p]] = r[[p, row]]
            colbits[[row, p]] = colbits[[p, row]]
        others = np.flatnonzero(colbits)
        others = others[others != row]
        if others.size:
            r[others, word:] ^= r[row, word:]
        pivots.append(col)
        row += 1
    return _unpack_rows(r, cols), pivots


def gf2_rank(a: np.ndarray) -> int:
    return len(gf2_rref(a)[1])


@dataclass(frozen=True)
class SystematicEncoder:
    """c[info_cols] = u and c[parity_cols] = P u (mod 2), from the RREF of H.

    P is stored bit-packed; each parity bit is the popcount parity of a row AND u.
    """

    n: int
    rank: int
    info_cols: np.ndarray
    parity_cols: np.ndarray
    parity_words: np.ndarray  # (rank, ceil(k/64)) uint64

    @classmethod
    def from_matrix(cls, h: ParityCheckMatrix) -> "SystematicEncoder":
        r, pivots = gf2_rref(h.dense())
        rank = len(pivots)
        piv = np.array(pivots, dtype=np.int64)
        info = np.setdiff1d(np.arange(h.n), piv)
        return cls(n=h.n, rank=rank, info_cols=info, parity_cols=piv,
                   parity_words=_pack_rows(r[:rank][:, info]))

    @property
    def k(self) -> int:
        return self.info_cols.size

    def encode(self, info) -> np.ndarray:
        u = np.asarray(info, dtype=np.uint8).ravel()
        if u.size != self.k:
            raise ValueError(f"expected {self.k} info bits, got {u.size}")
        c = np.zeros(self.n, dtype=np.uint8)
        c[self.info_cols] = u
        uw = _pack_rows(u[None, :])[0]
        ones = np.bitwise_count(self.parity_words & uw).sum(axis=1)
        c[self.parity_cols] = ones & 1
        return c

    def extract(self, codeword) -> np.ndarray:
        return np.asarray(codeword)[self.info_cols]


def encode(info, h: ParityCheckMatrix) -> np.ndarray:
    enc = h.encoder
    if enc.rank < h.m:
        raise RankDeficientError(enc.rank, h.m)
    return enc.encode(info)


# ---------------------------------------------------------------------------
# Belief propagation


@dataclass
class DecodeResult:
    llrs: np.ndarray
    bits: np.ndarray
    valid: bool
    iterations: int


_PHI_MIN, _PHI_MAX = 1e-12, 60.0


def _phi(x):
    # phi(x) = -log tanh(x/2), an involution on (0, inf)
    x = np.clip(x, _PHI_MIN, _PHI_MAX)
    return -np.log(np.tanh(0.5 * x))


def decode_bp(llrs, h: ParityCheckMatrix, max_iters: int = DEFAULT_DECODE_ITERS, *,
              variant: str = "sum-product", output: str = "aposteriori",
              early_stop: bool = True, min_sum_scale: float = 1.0) -> DecodeResult:
    """Flooding belief propagation.

    ``variant`` is ``"sum-product"`` (exact tanh rule) or ``"min-sum"``.
    ``output`` selects what is returned as ``llrs``: the a-posteriori totals
    (channel + all check messages) or the extrinsic part only.
    """
    if variant not in ("sum-product", "min-sum"):
        raise ValueError(f"unknown decoder variant {variant!r}")
    if output not in ("aposteriori", "extrinsic"):
        raise ValueError(f"unknown output mode {output!r}")
    ch = np.asarray(llrs, dtype=float)
    if ch.size != h.n:
        raise ValueError(f"expected {h.n} LLRs, got {ch.size}")
    chk, var = h.edge_check, h.edge_var
    deg = h.row_degrees
    starts = np.concatenate(([0], np.cumsum(deg)[:-1]))
    nonempty = deg > 0

    total = ch.copy()
    c2v = np.zeros(chk.size)
    bits = (total < 0).astype(np.uint8)
    valid = not h.syndrome(bits).any()
    it = 0
    while not (valid and early_stop) and it < max_iters:
        it += 1
        v2c = total[var] - c2v
        neg = v2c < 0
        mag = np.abs(v2c)
        neg_count = np.zeros(h.m, dtype=np.int64)
        np.add.at(neg_count, chk, neg)
        sign = np.where((neg_count[chk] - neg) % 2 == 1, -1.0, 1.0)
        if variant == "sum-product":
            f = _phi(mag)
            fsum = np.zeros(h.m)
            fsum[nonempty] = np.add.reduceat(f, starts[nonempty])
            new_mag = _phi(fsum[chk] - f)
        else:
            new_mag = _min_excluding(mag, chk, starts, deg) * min_sum_scale
        c2v = sign * new_mag
        total = ch + np.bincount(var, weights=c2v, minlength=h.n)
        bits = (total < 0).astype(np.uint8)
        valid = not h.syndrome(bits).any()
    out = total if output == "aposteriori" else total - ch
    return DecodeResult(llrs=out, bits=bits, valid=valid, iterations=it)


def _min_excluding(mag, chk, starts, deg):
    """For each edge, the minimum magnitude over the other edges of its check."""
    m = deg.size
    big = np.inf
    first = np.full(m, big)
    np.minimum.at(first, chk, mag)
    is_first = mag == first[chk]
    # second minimum: mask one occurrence of the first minimum per check
    edge_idx = np.arange(mag.size)
    first_pos = np.full(m, mag.size)
    np.minimum.at(first_pos, chk[is_first], edge_idx[is_first])
    masked = mag.copy()
    masked[first_pos[first_pos < mag.size]] = big
    second = np.full(m, big)
    np.minimum.at(second, chk, masked)
    out = np.where(edge_idx == first_pos[chk], second[chk], first[chk])
    return np.where(np.isinf(out), 0.0, out)


# ---------------------------------------------------------------------------
# Block interleaver


@lru_cache(maxsize=64)
def interleaver_permutation(n: int, rows: int) -> np.ndarray:
    """Output position i carries input element perm[i].

    Input is written row-wise into ``rows`` rows and read out column-wise. When
    ``rows`` does not divide ``n`` the grid is padded at the end and the
    placeholder cells are skipped on read-out.
    """
    if rows < 1:
        raise ValueError("rows must be >= 1")
    cols = -(-n // rows)
    grid = np.arange(rows * cols).reshape(rows, cols)
    order = grid.T.ravel()
    perm = order[order < n]
    perm.setflags(write=False)
    return perm


def interleave(v, rows: int) -> np.ndarray:
    v = np.asarray(v)
    return v[interleaver_permutation(v.size, rows)]


def deinterleave(v, rows: int) -> np.ndarray:
    v = np.asarray(v)
    out = np.empty_like(v)
    out[interleaver_permutation(v.size, rows)] = v
    return out


# ---------------------------------------------------------------------------
# Code construction


def regular_code(n: int, dv: int, dc: int, seed: int = 0, max_rounds: int = 2000) -> ParityCheckMatrix:
    """Random (dv, dc)-regular code without length-4 cycles and with full row rank.

    Sockets are matched at random, then edges taking part in a double edge or
    4-cycle are swapped with random partners until none remain.
    """
    if (n * dv) % dc:
        raise ValueError("n * dv must be divisible by dc")
    m = n * dv // dc
    rng = np.random.default_rng(seed)
    for _ in range(50):
        var = np.repeat(np.arange(n), dv)
        chk = rng.permutation(np.repeat(np.arange(m), dc))
        for _ in range(max_rounds):
            bad = _bad_edges(var, chk, n, m)
            if bad.size == 0:
                break
            for e in rng.permutation(bad):
                f = int(rng.integers(var.size))
                chk[e], chk[f] = chk[f], chk[e]
        else:
            continue
        h = ParityCheckMatrix(n, m, chk, var)
        if gf2_rank(h.dense()) == m:
            return h
    raise RuntimeError("failed to build a full-rank 4-cycle-free code")


def _bad_edges(var, chk, n, m) -> np.ndarray:
    h = sparse.coo_matrix((np.ones(var.size, dtype=np.int32), (chk, var)), shape=(m, n)).tocsr()
    h.sum_duplicates()
    bad = np.asarray(h[chk, var]).ravel() > 1
    overlap = sparse.triu(h @ h.T, k=1).tocoo()
    sel = overlap.data > 1
    for a, b in zip(overlap.row[sel], overlap.col[sel]):
        shared = np.intersect1d(h.indices[h.indptr[a]:h.indptr[a + 1]],
                                h.indices[h.indptr[b]:h.indptr[b + 1]])
        # break the cycle at one edge of the pair
        bad[np.flatnonzero((chk == a) & np.isin(var, shared[1:]))] = True
    return np.flatnonzero(bad)
