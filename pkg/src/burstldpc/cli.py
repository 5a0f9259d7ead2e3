"""Command-line entry point: ``burstldpc {sweep,estimate,demo-scatter,ldpc-check}``."""
from __future__ import annotations

import argparse
import configparser
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import channel as ch
from .constellation import SUPPORTED_ORDERS, build_qam
from .estimator import ESTIMATORS, TrellisInputs, estimate, state_error_rate
from .harness import (
    WORKERS_ENV,
    ConfigError,
    StopRule,
    emit_csv,
    emit_plotdump,
    load_config,
    run_sweep,
)
from .ldpc import AlistError, RankDeficientError, encode, gf2_rank, read_alist_file
from .likelihood import LikelihoodParams, state_logliks, symbol_state_logliks

EXIT_CONFIG = 2

log = logging.getLogger("burstldpc")


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_sweep(args) -> int:
    spec = load_config(args.config)
    if args.max_frames is not None or args.min_packet_errors is not None:
        spec = replace(spec, stop=StopRule(
            max_frames=args.max_frames or spec.stop.max_frames,
            min_packet_errors=args.min_packet_errors or spec.stop.min_packet_errors))
    records = run_sweep(spec, master_seed=args.seed, workers=args.workers)
    _write(emit_csv(records), args.out)
    for r in records:
        log.info("%s=%g %-9s BER=%.3e PER=%.3e frames=%d (%.1fs)", spec.axis, r.axis, r.scheme,
                 r.ber, r.per, r.frames, r.wall_time)
    return 0


def _estimate_settings(path: str):
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(Path(path).read_text())
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    chan = dict(ch.REFERENCE_PARAMS, snr_db=15.5)
    if "channel" in cp:
        chan.update({k: float(v) for k, v in cp["channel"].items()})
    sec = cp["estimate"] if "estimate" in cp else {}
    link = cp["link"] if "link" in cp else {}
    try:
        params = ch.GeChannelParams.from_snr_db(chan.pop("snr_db"), **chan)
        order = int(link.get("modulation", 16))
        if order not in SUPPORTED_ORDERS:
            raise ConfigError(f"unsupported modulation {order}")
        names = sec.get("estimators", "va sova bcjr").replace(",", " ").split()
        for n in names:
            if n not in ESTIMATORS:
                raise ConfigError(f"unknown estimator {n!r}")
        return dict(params=params, order=order, names=names,
                    slots=int(sec.get("slots", 10000)), bias_db=float(sec.get("bias_db", -3.0)),
                    span=int(sec.get("span", 100)), seed=int(sec.get("seed", 0)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_estimate(args) -> int:
    cfg = _estimate_settings(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    c = build_qam(cfg["order"])
    rng = np.random.default_rng(cfg["seed"])
    x = c.points[rng.integers(0, c.order, cfg["slots"])]
    tx = ch.transmit(x, cfg["params"], rng)
    lp = LikelihoodParams.from_channel(cfg["params"], cfg["bias_db"])
    inp = TrellisInputs.from_channel(state_logliks(symbol_state_logliks(tx.y, c, lp)), cfg["params"])
    real = tx.realization
    cols = {"k": np.arange(1, len(real)), "theta": real.phases[1:], "w": real.innovations[1:],
            "z": real.states[1:]}
    for name in cfg["names"]:
        post = estimate(name, inp, cfg["span"])
        cols[f"z_hat_{name}"] = post.hard
        cols[f"p_good_{name}"] = post.p_good
        log.info("%-4s state error rate %.4e", name, state_error_rate(post, real.states[1:]))
    _write(emit_plotdump("trace", cols), args.out)
    return 0


def cmd_demo_scatter(args) -> int:
    c = build_qam(args.order)
    p = ch.GeChannelParams.from_snr_db(args.snr_db, **ch.REFERENCE_PARAMS)
    rng = np.random.default_rng(args.seed)
    x = c.points[rng.integers(0, c.order, args.symbols)]
    tx = ch.transmit(x, p, rng)
    _write(emit_plotdump("scatter", {"x": tx.x, "s": tx.s, "r": tx.r, "y": tx.y}), args.out)
    return 0


def cmd_ldpc_check(args) -> int:
    try:
        h = read_alist_file(args.alist)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.alist}: {exc}") from exc
    except AlistError as exc:
        raise ConfigError(f"{args.alist}: {exc}") from exc
    rank = gf2_rank(h.dense())
    print(f"n={h.n} m={h.m} rank={rank} k={h.n - rank} rate={(h.n - rank) / h.n:.4f}")
    print(f"column degrees {sorted(set(h.col_degrees.tolist()))}, "
          f"row degrees {sorted(set(h.row_degrees.tolist()))}")
    print(f"4-cycle free: {not h.has_four_cycles()}")
    try:
        rng = np.random.default_rng(0)
        ok = all(h.is_codeword(encode(rng.integers(0, 2, h.k), h)) for _ in range(8))
    except RankDeficientError as exc:
        print(f"encoder: {exc}")
        return 1
    print(f"encoder self-check: {'ok' if ok else 'FAILED'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="burstldpc", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="run a BER/PER sweep from an INI config")
    s.add_argument("config")
    s.add_argument("--seed", type=int, help="override the master seed")
    s.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    s.add_argument("--max-frames", type=int)
    s.add_argument("--min-packet-errors", type=int)
    s.add_argument("-o", "--out", help="CSV output path (default stdout)")
    s.set_defaults(func=cmd_sweep)

    e = sub.add_parser("estimate", help="dump a channel-state estimation trace as CSV")
    e.add_argument("config")
    e.add_argument("--seed", type=int)
    e.add_argument("-o", "--out")
    e.set_defaults(func=cmd_estimate)

    d = sub.add_parser("demo-scatter", help="dump x/s/r/y constellation scatter as CSV")
    d.add_argument("--order", type=int, default=16, choices=SUPPORTED_ORDERS)
    d.add_argument("--snr-db", type=float, default=20.0)
    d.add_argument("--symbols", type=int, default=10000)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("-o", "--out")
    d.set_defaults(func=cmd_demo_scatter)

    c = sub.add_parser("ldpc-check", help="parse an alist file and sanity-check the code")
    c.add_argument("alist")
    c.set_defaults(func=cmd_ldpc_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
