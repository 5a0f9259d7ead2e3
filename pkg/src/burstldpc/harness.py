"""Monte Carlo campaign driver: sweep specs, BER/PER accounting, seeding and CSV output."""
from __future__ import annotations

import configparser
import csv
import io
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .channel import REFERENCE_PARAMS, GeChannelParams, frame_rng
from .ldpc import AlistError, load_code
from .pipeline import SCHEMES, Link, SchemeConfig, make_link, run_scheme, simulate_frame

log = logging.getLogger(__name__)

AXES = ("snr_db", "sigma2_b", "sigma2_g", "p_gb", "p_bg", "bias_db", "outer_bias_db")
CHANNEL_KEYS = ("snr_db", "sigma2_g", "sigma2_b", "p_gb", "p_bg")
PACKET_BITS = 512
WORKERS_ENV = "BURSTLDPC_WORKERS"
DEFAULT_CODE = "regular-3-18-1944"

CSV_HEADER = ("axis", "scheme", "estimator", "bits", "bit_errors", "packets", "packet_errors",
              "ber", "per", "frames", "seed")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class StopRule:
    max_frames: int = 2000
    min_packet_errors: int = 100

    def done(self, frames: int, packet_errors: int) -> bool:
        return frames >= self.max_frames or packet_errors >= self.min_packet_errors


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple[float, ...]
    modulation: int = 16
    channel: Mapping[str, float] = field(default_factory=lambda: dict(REFERENCE_PARAMS, snr_db=15.0))
    schemes: tuple[SchemeConfig, ...] = ()
    code: str = DEFAULT_CODE
    interleaver_rows: int = 1024
    stop: StopRule = StopRule()
    master_seed: int = 0
    packet_bits: int = PACKET_BITS
    chunk_frames: int = 8

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.schemes:
            object.__setattr__(self, "schemes", tuple(
                SchemeConfig.for_modulation(s, self.modulation) for s in SCHEMES))
        self.validate()

    def validate(self) -> None:
        if self.axis not in AXES:
            raise ConfigError(f"unknown sweep axis {self.axis!r}; choose from {AXES}")
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        if list(self.values) != sorted(self.values):
            raise ConfigError("sweep values must be sorted ascending")
        if self.modulation not in (4, 16, 64):
            raise ConfigError(f"unsupported modulation {self.modulation}")
        missing = [k for k in CHANNEL_KEYS if k not in self.channel and k != self.axis]
        if missing:
            raise ConfigError(f"channel is missing {missing}")
        names = [s.name for s in self.schemes]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate schemes {names}")
        if self.stop.max_frames < 1 or self.stop.min_packet_errors < 1:
            raise ConfigError("stop rule limits must be positive")
        if self.chunk_frames < 1 or self.interleaver_rows < 1:
            raise ConfigError("chunk_frames and interleaver_rows must be positive")
        try:
            for v in self.values:
                self.channel_for(v)
                self.schemes_for(v)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        try:
            code = load_code(self.code)
        except (OSError, AlistError) as exc:
            raise ConfigError(f"cannot load code {self.code!r}: {exc}") from exc
        if code.n % int(np.log2(self.modulation)):
            raise ConfigError(f"code length {code.n} does not fit {self.modulation}-QAM symbols")

    def channel_for(self, value: float) -> GeChannelParams:
        ch = dict(self.channel)
        if self.axis in CHANNEL_KEYS:
            ch[self.axis] = value
        return GeChannelParams.from_snr_db(ch["snr_db"], p_gb=ch["p_gb"], p_bg=ch["p_bg"],
                                           sigma2_g=ch["sigma2_g"], sigma2_b=ch["sigma2_b"])

    def schemes_for(self, value: float) -> tuple[SchemeConfig, ...]:
        if self.axis == "bias_db":
            return tuple(replace(s, bias_db=value) for s in self.schemes)
        if self.axis == "outer_bias_db":
            return tuple(replace(s, outer_bias_db=value) if s.scheme == "iba" else s
                         for s in self.schemes)
        return self.schemes

    def link_for(self, value: float) -> Link:
        return make_link(self.modulation, load_code(self.code), self.channel_for(value),
                         self.interleaver_rows)


@dataclass
class MetricRecord:
    axis: float
    scheme: str
    estimator: str
    bits: int
    bit_errors: int
    packets: int
    packet_errors: int
    frames: int
    seed: int
    axis_name: str = field(default="", compare=False)
    wall_time: float = field(default=0.0, compare=False)

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else 0.0

    @property
    def per(self) -> float:
        return self.packet_errors / self.packets if self.packets else 0.0


class PacketCounter:
    """Accumulates a concatenated information stream frame by frame.

    Packets are consecutive fixed-size windows of the stream and may straddle
    frame boundaries; only completed packets enter the PER.
    """

    def __init__(self, packet_bits: int = PACKET_BITS):
        self.packet_bits = packet_bits
        self.bits = 0
        self.bit_errors = 0
        self.frames = 0
        self._errored: set[int] = set()

    def add(self, nbits: int, error_positions: Iterable[int]) -> None:
        pos = np.asarray(list(error_positions) if not isinstance(error_positions, np.ndarray)
                         else error_positions, dtype=np.int64)
        self.bit_errors += int(pos.size)
        self._errored.update(((self.bits + pos) // self.packet_bits).tolist())
        self.bits += int(nbits)
        self.frames += 1

    @property
    def packets(self) -> int:
        return self.bits // self.packet_bits

    @property
    def packet_errors(self) -> int:
        done = self.packets
        return sum(1 for p in self._errored if p < done)


def packetize_and_count(decoded, truth, packet_bits: int = PACKET_BITS) -> tuple[int, int]:
    decoded = np.asarray(decoded).ravel()
    truth = np.asarray(truth).ravel()
    if decoded.size != truth.size:
        raise ValueError(f"stream lengths differ: {decoded.size} vs {truth.size}")
    diff = decoded != truth
    whole = (diff.size // packet_bits) * packet_bits
    per_packet = diff[:whole].reshape(-1, packet_bits).any(axis=1)
    return int(diff.sum()), int(per_packet.sum())


# ---------------------------------------------------------------------------
# frame simulation (runs in worker processes)

_LINK_CACHE: dict = {}


def _link(spec: SweepSpec, value: float) -> Link:
    key = (spec.code, spec.modulation, spec.interleaver_rows, spec.channel_for(value))
    link = _LINK_CACHE.get(key)
    if link is None:
        link = _LINK_CACHE[key] = spec.link_for(value)
    return link


def simulate_frames(spec: SweepSpec, value: float, frame_indices: Sequence[int],
                    scheme_ids: Sequence[int]) -> list[list[tuple[int, np.ndarray, str]]]:
    """For each frame: one (bit_errors, error_positions, realization digest) per scheme.

    All schemes decode the very same realization; scheme results never consume
    randomness, so a frame's outcome depends only on (master seed, frame index).
    """
    link = _link(spec, value)
    schemes = spec.schemes_for(value)
    out = []
    for idx in frame_indices:
        frame = simulate_frame(link, frame_rng(spec.master_seed, idx))
        per_scheme = []
        for sid in scheme_ids:
            res = run_scheme(frame, schemes[sid], link)
            per_scheme.append((res.bit_errors, res.error_positions, res.realization))
        out.append(per_scheme)
    return out


def _chunk_job(args):
    return simulate_frames(*args)


def resolve_workers(workers: int | None = None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    return max(1, int(workers))


def run_sweep(spec: SweepSpec, master_seed: int | None = None,
              workers: int | None = None) -> list[MetricRecord]:
    """Simulate every (axis value, scheme) pair until its stop rule fires.

    Frames are generated in fixed-size chunks and merged strictly in frame
    order, so the records do not depend on how many workers run the chunks.
    """
    if master_seed is not None:
        spec = replace(spec, master_seed=int(master_seed))
    workers = resolve_workers(workers)
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    records: list[MetricRecord] = []
    try:
        for value in spec.values:
            records.extend(_run_point(spec, value, pool, workers))
    finally:
        if pool is not None:
            pool.shutdown()
    return records


def _run_point(spec: SweepSpec, value: float, pool, workers: int) -> list[MetricRecord]:
    schemes = spec.schemes_for(value)
    n_schemes = len(schemes)
    counters = [PacketCounter(spec.packet_bits) for _ in schemes]
    active = list(range(n_schemes))
    started = time.perf_counter()
    elapsed = [0.0] * n_schemes
    k = _link(spec, value).code.k
    next_frame = 0
    while active and next_frame < spec.stop.max_frames:
        jobs = []
        for _ in range(workers):
            if next_frame >= spec.stop.max_frames:
                break
            stop = min(next_frame + spec.chunk_frames, spec.stop.max_frames)
            jobs.append((spec, value, range(next_frame, stop), tuple(active)))
            next_frame = stop
        results = pool.map(_chunk_job, jobs) if pool is not None else map(_chunk_job, jobs)
        for job, chunk in zip(jobs, results):
            for frame_res in chunk:
                # a job reports the schemes active when it was dispatched
                by_sid = dict(zip(job[3], frame_res))
                still = []
                for sid in active:
                    _, pos, _ = by_sid[sid]
                    c = counters[sid]
                    c.add(k, pos)
                    if spec.stop.done(c.frames, c.packet_errors):
                        elapsed[sid] = time.perf_counter() - started
                    else:
                        still.append(sid)
                active = still
                if not active:
                    break
            if not active:
                break
        log.info("%s=%g: %d frames dispatched, %d schemes active", spec.axis, value, next_frame,
                 len(active))
    now = time.perf_counter() - started
    out = []
    for sid, (cfg, c) in enumerate(zip(schemes, counters)):
        out.append(MetricRecord(axis=value, scheme=cfg.name,
                                estimator="-" if cfg.scheme == "baseline" else cfg.estimator,
                                bits=c.bits, bit_errors=c.bit_errors, packets=c.packets,
                                packet_errors=c.packet_errors, frames=c.frames,
                                seed=spec.master_seed, axis_name=spec.axis,
                                wall_time=elapsed[sid] or now))
    return out


# ---------------------------------------------------------------------------
# output


def emit_csv(records: Iterable[MetricRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([repr(float(r.axis)), r.scheme, r.estimator, r.bits, r.bit_errors, r.packets,
                    r.packet_errors, repr(r.ber), repr(r.per), r.frames, r.seed])
    return buf.getvalue()


def parse_csv(text: str) -> list[MetricRecord]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [MetricRecord(axis=float(r["axis"]), scheme=r["scheme"], estimator=r["estimator"],
                         bits=int(r["bits"]), bit_errors=int(r["bit_errors"]),
                         packets=int(r["packets"]), packet_errors=int(r["packet_errors"]),
                         frames=int(r["frames"]), seed=int(r["seed"])) for r in rows]


PLOTDUMP_KINDS = ("scatter", "trace", "curve")


def emit_plotdump(kind: str, data) -> str:
    """CSV text for plotting.

    ``scatter``: mapping of series name to complex samples -> ``series,re,im``.
    ``trace``: mapping of column name to equal-length arrays (e.g. k, theta, w, z, z_hat, p_good).
    ``curve``: iterable of MetricRecord -> ``axis,scheme,ber,per``.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if kind == "scatter":
        w.writerow(("series", "re", "im"))
        for name, pts in data.items():
            for z in np.asarray(pts, dtype=complex):
                w.writerow((name, repr(float(z.real)), repr(float(z.imag))))
    elif kind == "trace":
        cols = list(data)
        arrays = [np.asarray(data[c]) for c in cols]
        if len({a.size for a in arrays}) > 1:
            raise ValueError("trace columns differ in length")
        w.writerow(cols)
        for row in zip(*arrays):
            w.writerow([_fmt(v) for v in row])
    elif kind == "curve":
        w.writerow(("axis", "scheme", "ber", "per"))
        for r in data:
            w.writerow((repr(float(r.axis)), r.scheme, repr(r.ber), repr(r.per)))
    else:
        raise ValueError(f"unknown plot dump kind {kind!r}; choose from {PLOTDUMP_KINDS}")
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (np.integer, int)):
        return str(int(v))
    return repr(float(v))


# ---------------------------------------------------------------------------
# config


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


_SCHEME_KEYS = {f.name: f.type for f in fields(SchemeConfig)}


def parse_config(text: str) -> SweepSpec:
    """Build a SweepSpec from INI text; ``data/sweep.ini`` in the package is a worked example."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    try:
        if "sweep" not in cp:
            raise ConfigError("missing [sweep] section")
        sw = cp["sweep"]
        link = cp["link"] if "link" in cp else {}
        modulation = int(link.get("modulation", 16))
        channel = dict(REFERENCE_PARAMS, snr_db=15.0)
        if "channel" in cp:
            for key, val in cp["channel"].items():
                if key not in CHANNEL_KEYS:
                    raise ConfigError(f"unknown channel key {key!r}")
                channel[key] = float(val)
        schemes = []
        for name in cp.sections():
            if not name.startswith("scheme:"):
                continue
            sec = dict(cp[name])
            unknown = set(sec) - set(_SCHEME_KEYS)
            if unknown:
                raise ConfigError(f"[{name}] unknown keys {sorted(unknown)}")
            kind = sec.pop("scheme", name.split(":", 1)[1])
            kw = {}
            for key, val in sec.items():
                if key in ("estimator", "decoder", "feedback"):
                    kw[key] = val
                elif key in ("outer_iterations", "decode_iterations", "span"):
                    kw[key] = int(val)
                else:
                    kw[key] = float(val)
            schemes.append(SchemeConfig.for_modulation(kind, modulation, **kw))
        stop = StopRule()
        if "stop" in cp:
            st = cp["stop"]
            stop = StopRule(max_frames=int(st.get("max_frames", stop.max_frames)),
                            min_packet_errors=int(st.get("min_packet_errors", stop.min_packet_errors)))
        if "axis" not in sw or "values" not in sw:
            raise ConfigError("[sweep] needs axis and values")
        return SweepSpec(
            axis=sw["axis"].strip(),
            values=tuple(_floats(sw["values"])),
            modulation=modulation,
            channel=channel,
            schemes=tuple(schemes),
            code=link.get("code", DEFAULT_CODE),
            interleaver_rows=int(link.get("interleaver_rows", 1024)),
            stop=stop,
            master_seed=int(sw.get("seed", 0)),
            packet_bits=int(sw.get("packet_bits", PACKET_BITS)),
            chunk_frames=int(sw.get("chunk_frames", 8)),
        )
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> SweepSpec:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
