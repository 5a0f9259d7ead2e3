"""Channel-state estimation on the two-state GE trellis: VA, SOVA and windowed BCJR."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import BAD, GOOD, GeChannelParams, steady_state

DEFAULT_TRACEBACK = 100
DEFAULT_WINDOW = 100

_NEG_INF = -math.inf


def _log(p):
    with np.errstate(divide="ignore"):
        return np.log(p)


@dataclass(frozen=True)
class TrellisInputs:
    loglik: np.ndarray  # (N, 2) log p(y_k | z)
    log_trans: np.ndarray  # (2, 2) log P(z_k = j | z_{k-1} = i)
    log_init: np.ndarray  # (2,) log P(z_1)

    @classmethod
    def from_channel(cls, loglik, p: GeChannelParams) -> "TrellisInputs":
        loglik = np.atleast_2d(np.asarray(loglik, dtype=float))
        return cls(loglik=loglik, log_trans=_log(p.transition_matrix()),
                   log_init=_log(np.array(steady_state(p))))

    def __len__(self) -> int:
        return self.loglik.shape[0]

    def path_cost(self, z) -> float:
        """Accumulated VA metric (negative log-likelihood) of one state sequence."""
        z = np.asarray(z)
        cost = -self.log_init[z[0]] - self.loglik[np.arange(len(z)), z].sum()
        return float(cost - self.log_trans[z[:-1], z[1:]].sum())


@dataclass(frozen=True)
class StatePosterior:
    log_post: np.ndarray  # (N, 2), normalized per slot
    hard: np.ndarray  # (N,) int8

    @classmethod
    def from_log(cls, log_post: np.ndarray, hard=None) -> "StatePosterior":
        lp = np.asarray(log_post, dtype=float)
        lp = lp - np.logaddexp(lp[:, :1], lp[:, 1:])
        if hard is None:
            hard = (lp[:, 1] > lp[:, 0]).astype(np.int8)
        return cls(log_post=lp, hard=np.asarray(hard, dtype=np.int8))

    @classmethod
    def from_states(cls, states) -> "StatePosterior":
        """Degenerate posterior putting all mass on the given states."""
        states = np.asarray(states, dtype=np.int8)
        lp = np.zeros((states.size, 2))
        lp[np.arange(states.size), 1 - states] = _NEG_INF
        return cls(log_post=lp, hard=states)

    @classmethod
    def from_p_good(cls, p_good) -> "StatePosterior":
        p_good = np.clip(np.asarray(p_good, dtype=float), 0.0, 1.0)
        lp = _log(np.column_stack([p_good, 1.0 - p_good]))
        return cls.from_log(lp)

    @property
    def p_good(self) -> np.ndarray:
        return np.exp(self.log_post[:, GOOD])

    @property
    def p_bad(self) -> np.ndarray:
        return np.exp(self.log_post[:, BAD])

    def __len__(self) -> int:
        return self.hard.size


def _viterbi_forward(inp: TrellisInputs):
    """Add-compare-select. Returns accumulated metrics (N, 2) and survivor pointers."""
    ll = inp.loglik.tolist()
    c = (-inp.log_trans).tolist()
    n = len(ll)
    metric = [[0.0, 0.0]] * n
    ptr = [[0, 0]] * n
    g = -inp.log_init[0] - ll[0][0]
    b = -inp.log_init[1] - ll[0][1]
    metric[0] = [g, b]
    for k in range(1, n):
        lg, lb = ll[k]
        gg, bg = g + c[0][0], b + c[1][0]
        gb, bb = g + c[0][1], b + c[1][1]
        # ties resolve toward G
        pg = 0 if gg <= bg else 1
        pb = 0 if gb <= bb else 1
        g = (gg if pg == 0 else bg) - lg
        b = (gb if pb == 0 else bb) - lb
        metric[k] = [g, b]
        ptr[k] = [pg, pb]
    return np.array(metric), np.array(ptr, dtype=np.int8)


def _best_state(metric: np.ndarray) -> np.ndarray:
    return (metric[:, 1] < metric[:, 0]).astype(np.int8)


def viterbi_decisions(inp: TrellisInputs, traceback: int = DEFAULT_TRACEBACK):
    """Hard decisions with a finite traceback depth; slot k is decided at slot k + traceback."""
    metric, ptr = _viterbi_forward(inp)
    n = len(inp)
    k = np.arange(n)
    pos = np.minimum(k + traceback, n - 1)
    cur = _best_state(metric)[pos]
    for _ in range(min(traceback, n)):
        active = pos > k
        if not active.any():
            break
        cur = np.where(active, ptr[pos, cur], cur)
        pos = np.where(active, pos - 1, pos)
    return cur.astype(np.int8), metric


def viterbi(inp: TrellisInputs, traceback: int = DEFAULT_TRACEBACK) -> StatePosterior:
    hard, _ = viterbi_decisions(inp, traceback)
    return StatePosterior.from_states(hard)


def _windowed_backward_cost(inp: TrellisInputs, depth: int) -> np.ndarray:
    """Min cost from (k, s) over at most ``depth`` further slots, ending in any state."""
    ll = inp.loglik
    c = -inp.log_trans
    n = len(inp)
    back = np.zeros((n, 2))
    for _ in range(min(depth, n - 1)):
        nxt = back[1:] - ll[1:]  # (n-1, 2) indexed by the successor state
        new = np.empty_like(back)
        new[:-1] = np.minimum(c[None, :, 0] + nxt[:, None, 0], c[None, :, 1] + nxt[:, None, 1])
        new[-1] = 0.0
        back = new
    return back


def _sova_gap(inp: TrellisInputs, traceback: int):
    hard, metric = viterbi_decisions(inp, traceback)
    gamma = metric + _windowed_backward_cost(inp, traceback)
    idx = np.arange(len(inp))
    return hard, gamma[idx, 1 - hard] - gamma[idx, hard]


def sova_reliability(inp: TrellisInputs, traceback: int = DEFAULT_TRACEBACK) -> np.ndarray:
    """Metric gap Gamma(other state) - Gamma(decided state) per slot."""
    return _sova_gap(inp, traceback)[1]


def sova(inp: TrellisInputs, traceback: int = DEFAULT_TRACEBACK) -> StatePosterior:
    """Soft-output VA.

    The reliability of slot k is the metric gap between the best path through
    the decided state and the best path through the other state, both scored
    over the same traceback window (slots up to k + traceback). For a two-state
    trellis this constrained-flip search is exact and cheap.
    """
    hard, delta = _sova_gap(inp, traceback)
    with np.errstate(invalid="ignore"):
        delta = np.nan_to_num(delta, nan=0.0)
    # P(decided state) = 1 / (1 + exp(-delta))
    idx = np.arange(len(inp))
    lp = np.empty((len(inp), 2))
    lp[idx, hard] = -np.logaddexp(0.0, -delta)
    lp[idx, 1 - hard] = -np.logaddexp(0.0, delta)
    return StatePosterior(log_post=lp, hard=hard)


def _lse(a: float, b: float) -> float:
    if a == _NEG_INF:
        return b
    if b == _NEG_INF:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


def _forward(ll, lt, log_init):
    n = len(ll)
    alpha = [None] * n
    g = log_init[0] + ll[0][0]
    b = log_init[1] + ll[0][1]
    for k in range(n):
        if k:
            lg, lb = ll[k]
            g, b = _lse(g + lt[0][0], b + lt[1][0]) + lg, _lse(g + lt[0][1], b + lt[1][1]) + lb
        # renormalize against drift
        s = _lse(g, b)
        g, b = g - s, b - s
        alpha[k] = (g, b)
    return alpha


def _backward(ll, lt, start: int, edge: int):
    """log beta over [start, edge], uniform at the edge. Returns a list indexed from start."""
    out = [None] * (edge - start + 1)
    g = b = 0.0
    out[-1] = (g, b)
    for k in range(edge - 1, start - 1, -1):
        lg, lb = ll[k + 1]
        ng, nb = g + lg, b + lb
        g, b = _lse(lt[0][0] + ng, lt[0][1] + nb), _lse(lt[1][0] + ng, lt[1][1] + nb)
        s = _lse(g, b)
        g, b = g - s, b - s
        out[k - start] = (g, b)
    return out


def bcjr(inp: TrellisInputs, window: int = DEFAULT_WINDOW) -> StatePosterior:
    """Log-domain forward-backward with a windowed backward pass.

    The forward recursion runs over the whole frame, which is the same as
    warm-starting every window from its predecessor. Backward recursions start
    from a uniform metric at each window edge; windows advance by half their
    length and only the first half of each is kept, so every emitted slot sees
    at least ``window // 2`` slots of lookahead.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    ll = inp.loglik.tolist()
    lt = inp.log_trans.tolist()
    n = len(ll)
    alpha = _forward(ll, lt, inp.log_init.tolist())
    beta = [None] * n
    step = max(window // 2, 1)
    start = 0
    while start < n:
        edge = min(start + window - 1, n - 1)
        seg = _backward(ll, lt, start, edge)
        stop = n if edge == n - 1 else start + step
        beta[start:stop] = seg[:stop - start]
        start = stop
    lp = np.array(alpha) + np.array(beta)
    return StatePosterior.from_log(lp)


ESTIMATORS = {"va": viterbi, "sova": sova, "bcjr": bcjr}


def estimate(name: str, inp: TrellisInputs, span: int = DEFAULT_WINDOW) -> StatePosterior:
    """Run the named estimator; ``span`` is the traceback depth or BCJR window."""
    try:
        fn = ESTIMATORS[name]
    except KeyError:
        raise ValueError(f"unknown estimator {name!r}; choose from {sorted(ESTIMATORS)}") from None
    return fn(inp, span)


def state_error_rate(post: StatePosterior, truth) -> float:
    truth = np.asarray(truth)
    return float(np.mean(post.hard != truth))
