"""Trace-driven playback simulation.

A session is a sequence of variable-length slots.  Each slot is a download,
a sleep/pause, or the wasted part of an abandoned download.  The buffer
follows Q' = max(Q - T/p, 0) + a, and any part of a slot the buffer cannot
cover is a stall.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from . import policy
from .errors import ParameterError, StallError
from .model import PlayerConfig, Variant, VideoManifest
from .policy import Download, PauseFor, SleepUntilBufferBelow

LOG_COLUMNS = ("k", "n", "kind", "t_k", "T_k", "m", "bits", "Q_start_chunks", "rebuffer_s", "abandoned")


@dataclass(frozen=True)
class Segment:
    duration: float  # s
    bandwidth: float  # bits/s
    latency: float  # s


class NetworkTrace:
    """Piecewise-constant bandwidth with a per-segment request latency."""

    def __init__(self, segments: Sequence[Segment], cyclic: bool = False):
        if not segments:
            raise ParameterError("trace needs at least one segment")
        for seg in segments:
            if not seg.duration > 0:
                raise ParameterError("segment durations must be positive")
            if seg.bandwidth < 0 or seg.latency < 0:
                raise ParameterError("bandwidth and latency must be non-negative")
        if cyclic and not any(seg.bandwidth > 0 for seg in segments):
            raise ParameterError("a cyclic trace needs at least one segment with bandwidth")
        self.segments = tuple(segments)
        self.cyclic = cyclic
        self.starts = []
        self.cum = []  # bits delivered from the period start to each segment start
        t = bits = 0.0
        for seg in self.segments:
            self.starts.append(t)
            self.cum.append(bits)
            t += seg.duration
            bits += seg.duration * seg.bandwidth
        self.period = t
        self.period_bits = bits

    def __eq__(self, other):
        return isinstance(other, NetworkTrace) and (self.segments, self.cyclic) == (other.segments, other.cyclic)

    def __repr__(self):
        return f"NetworkTrace({len(self.segments)} segments, period={self.period}s, cyclic={self.cyclic})"

    def _locate(self, t):
        """(cycle, segment index, offset into the segment) for time t >= 0."""
        if self.cyclic:
            q = math.floor(t / self.period)
            r = t - q * self.period
            if r >= self.period:
                q, r = q + 1, 0.0
        else:
            if t >= self.period:
                return 0, len(self.segments), t - self.period
            q, r = 0, t
        k = bisect.bisect_right(self.starts, r) - 1
        return q, k, r - self.starts[k]

    def segment_at(self, t) -> Optional[Segment]:
        _, k, _ = self._locate(t)
        return self.segments[k] if k < len(self.segments) else None

    def latency_at(self, t) -> float:
        seg = self.segment_at(t)
        # past the end of a finite trace: reuse the final latency
        return seg.latency if seg is not None else self.segments[-1].latency

    def bandwidth_at(self, t) -> float:
        seg = self.segment_at(t)
        return seg.bandwidth if seg is not None else 0.0

    def cumulative_bits(self, t) -> float:
        """Bits that could flow during [0, t]."""
        q, k, off = self._locate(t)
        if k == len(self.segments):
            return self.period_bits
        return q * self.period_bits + self.cum[k] + off * self.segments[k].bandwidth

    def time_for_bits(self, target) -> float:
        """Earliest time at which ``cumulative_bits`` reaches ``target``."""
        if target <= 0:
            return 0.0
        q = 0
        rem = target
        if self.cyclic:
            q = math.floor(target / self.period_bits)
            rem = target - q * self.period_bits
            if rem <= 0:
                q, rem = q - 1, self.period_bits
        elif target > self.period_bits:
            raise StallError("trace exhausted before the transfer could finish")
        ends = self.cum[1:] + [self.period_bits]
        k = bisect.bisect_left(ends, rem)
        k = min(k, len(self.segments) - 1)
        while self.segments[k].bandwidth <= 0:
            k += 1
        seg = self.segments[k]
        off = (rem - self.cum[k]) / seg.bandwidth
        return q * self.period + self.starts[k] + min(max(off, 0.0), seg.duration)

    def next_boundary(self, t) -> float:
        """First segment boundary strictly after t (inf past a finite trace)."""
        q, k, _ = self._locate(t)
        if k == len(self.segments):
            return math.inf
        nxt = q * self.period + self.starts[k] + self.segments[k].duration
        if nxt <= t:
            nxt = t + self.segments[k].duration
        if not self.cyclic and nxt >= self.period:
            return self.period if self.period > t else math.inf
        return nxt

    def mean_bandwidth(self) -> float:
        return self.period_bits / self.period

    def scaled(self, factor) -> "NetworkTrace":
        return NetworkTrace(
            [Segment(s.duration, s.bandwidth * factor, s.latency) for s in self.segments], self.cyclic
        )


def constant_trace(bandwidth, latency=0.0, duration=1e9, cyclic=True) -> NetworkTrace:
    return NetworkTrace([Segment(duration, bandwidth, latency)], cyclic=cyclic)


def transfer_time(trace: NetworkTrace, t_start, bits, chunk=None) -> float:
    """Completion instant of a ``bits``-sized request issued at ``t_start``.

    The request first waits out the latency of the segment active at
    ``t_start``; then bits flow at the trace bandwidth.
    """
    if bits < 0:
        raise ParameterError("cannot transfer a negative number of bits")
    flow_start = t_start + trace.latency_at(t_start)
    if bits == 0:
        return flow_start
    base = trace.cumulative_bits(flow_start)
    try:
        end = trace.time_for_bits(base + bits)
    except StallError:
        what = f"chunk {chunk}" if chunk is not None else "transfer"
        raise StallError(f"{what} can never finish: trace has no bandwidth left") from None
    return max(end, flow_start)


def step_buffer(Q, T, downloaded, p) -> float:
    """Buffer level (chunks) after a slot of length T."""
    return max(Q - T / p, 0.0) + (1 if downloaded else 0)


@dataclass
class ChunkRecord:
    k: int
    n: int
    kind: str  # download | abandoned | sleep | pause
    t_start: float
    duration: float
    m: Optional[int]
    bits: float
    q_start: float
    rebuffer: float
    abandoned_from: Optional[tuple] = None  # (level, wasted bits) on a restarted download
    V: Optional[float] = None

    @property
    def downloaded(self) -> bool:
        return self.kind == "download"


@dataclass
class SessionLog:
    chunk_duration: float
    chunk_count: int
    gamma_p: float
    variant: str
    records: List[ChunkRecord] = field(default_factory=list)
    t_end: float = 0.0
    startup_delay: float = 0.0
    total_rebuffer: float = 0.0
    last_download_end: float = 0.0
    final_buffer: float = 0.0  # chunks
    warnings: List[str] = field(default_factory=list)
    utility_sum: float = 0.0  # accumulated while simulating
    max_buffer: float = 0.0  # chunks, right after a download

    @property
    def downloads(self) -> List[ChunkRecord]:
        return [r for r in self.records if r.kind == "download"]

    @property
    def levels(self) -> List[int]:
        return [r.m for r in self.downloads]

    @property
    def mid_stream_rebuffer(self) -> float:
        return self.total_rebuffer - self.startup_delay

    @property
    def online_joint(self) -> float:
        gamma = self.gamma_p / self.chunk_duration
        return (self.utility_sum + gamma * self.chunk_count * self.chunk_duration) / self.t_end

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for r in self.records:
            w.writerow([
                r.k, r.n, r.kind, repr(r.t_start), repr(r.duration),
                "" if r.m is None else r.m, repr(r.bits), repr(r.q_start), repr(r.rebuffer),
                1 if r.kind == "abandoned" else 0,
            ])
        return buf.getvalue()


class _Session:
    def __init__(self, manifest: VideoManifest, trace: NetworkTrace, config: PlayerConfig):
        self.manifest = manifest
        self.trace = trace
        self.config = config
        self.p = manifest.chunk_duration
        self.u = manifest.utilities
        self.t = 0.0
        self.Q = 0.0
        self.k = 0
        self.started = False
        self.log = SessionLog(self.p, manifest.chunk_count, config.gamma_p, config.variant.value)

    def _slot(self, n, kind, duration, m=None, bits=0.0, V=None, abandoned_from=None):
        self.k += 1
        stall = max(duration - self.Q * self.p, 0.0)
        rec = ChunkRecord(self.k, n, kind, self.t, duration, m, bits, self.Q, stall, abandoned_from, V)
        self.log.records.append(rec)
        self.log.total_rebuffer += stall
        self.Q = step_buffer(self.Q, duration, kind == "download", self.p)
        self.t += duration
        if kind == "download":
            if not self.started:
                self.started = True
                self.log.startup_delay = self.log.total_rebuffer
            self.log.max_buffer = max(self.log.max_buffer, self.Q)
        return rec

    def wait(self, n, kind, duration, V=None):
        if duration > 0:
            self._slot(n, kind, duration, V=V)

    def fetch(self, n, m, V, abandon_allowed):
        """Download chunk n starting at level m; returns (level delivered, measured bandwidth).

        Each abandonment moves to a strictly lower bitrate, so a chunk is
        restarted at most ``max_abandons`` times and never more than M - 1.
        """
        sizes = self.manifest.chunk_sizes(n)
        budget = self.config.max_abandons
        if budget is None:
            budget = len(sizes) - 1
        if not abandon_allowed:
            budget = 0
        origin = None
        while True:
            size = sizes[m - 1]
            t0 = self.t
            end = transfer_time(self.trace, t0, size, chunk=n)
            hit = self._watch(n, m, size, sizes, t0, end, V) if budget > 0 else None
            if hit is None:
                break
            t_ab, delivered, target = hit
            self._slot(n, "abandoned", t_ab - t0, m=m, bits=delivered, V=V)
            origin = (m, delivered)
            m = target
            budget -= 1
        self._slot(n, "download", end - t0, m=m, bits=size, V=V, abandoned_from=origin)
        self.log.utility_sum += self.u[m - 1]
        return m, size / (end - t0) if end > t0 else None

    def _watch(self, n, m, size, sizes, t0, end, V):
        tick = self.config.abandonment_tick
        flow_start = t0 + self.trace.latency_at(t0)
        base = self.trace.cumulative_bits(flow_start)
        j = 1
        next_tick = t0 + tick
        next_edge = self.trace.next_boundary(t0)
        while True:
            tau = min(next_tick, next_edge)
            if tau >= end:
                return None
            if tau == next_tick:
                j += 1
                next_tick = t0 + j * tick
            if tau == next_edge:
                next_edge = self.trace.next_boundary(tau)
            delivered = max(self.trace.cumulative_bits(tau) - base, 0.0) if tau > flow_start else 0.0
            remaining = size - delivered
            if remaining <= 0:
                return None
            q_now = max(self.Q - (tau - t0) / self.p, 0.0)
            hit = policy.shall_abandon(m, remaining, q_now, V, self.config.gamma_p, sizes, self.u)
            if hit is not None:
                return tau, delivered, hit.m


def simulate(manifest: VideoManifest, trace: NetworkTrace, config: PlayerConfig) -> SessionLog:
    """Play ``manifest`` over ``trace`` with the configured policy."""
    s = _Session(manifest, trace, config)
    p = manifest.chunk_duration
    u = manifest.utilities
    N = manifest.chunk_count
    gp = config.gamma_p
    V, qmax = config.resolve(u[0])
    variant = config.variant
    if variant is Variant.BASIC and not config.complies(u[0]):
        s.log.warnings.append(
            f"V={V:.6g} exceeds (Qmax-1)/(u1+gamma_p) for Qmax={qmax:.6g}; buffer bound not guaranteed"
        )
    state = policy.PolicyState()
    for n in range(1, N + 1):
        sizes = manifest.chunk_sizes(n)
        if variant is Variant.BASIC:
            v_n = V
            d = policy.bola_basic_decide(s.Q, v_n, gp, sizes, u)
            if isinstance(d, SleepUntilBufferBelow):
                s.wait(n, "sleep", (s.Q - d.threshold) * p, V=v_n)
                s.Q = d.threshold
                d = policy.bola_basic_decide(s.Q, v_n, gp, sizes, u)
            m = d.m
        elif variant is Variant.THROUGHPUT:
            v_n = V
            s.wait(n, "pause", max(p * (s.Q - qmax + 1), 0.0))
            m = policy.throughput_rule(state.measured_bandwidth, sizes, p)
        else:
            # to-end counts the buffered video too: it is the play time left from now
            q_dyn, v_n = policy.dynamic_v((n - 1) * p, (N - n + 1 + s.Q) * p, qmax, u[0], gp, p,
                                          config.minimum_buffer_chunks)
            pause = max(p * (s.Q - q_dyn + 1), 0.0)
            if pause > 0:
                s.wait(n, "pause", pause, V=v_n)
                s.Q = max(q_dyn - 1, 0.0)
            m, _ = policy._argmax_level(s.Q, v_n, gp, sizes, u)
            d = policy.oscillation_guard(m, state.previous_choice, state.measured_bandwidth, sizes, u, p,
                                         variant, v_n, gp, s.Q)
            if isinstance(d, PauseFor):
                s.wait(n, "pause", d.duration, V=v_n)
                d = d.then
            m = d.m
        delivered, r = s.fetch(n, m, v_n, config.abandonment)
        state.previous_choice = delivered
        if r is not None:
            state.measured_bandwidth = r
    log = s.log
    log.last_download_end = s.t
    log.final_buffer = s.Q
    log.t_end = s.t + s.Q * p
    return log


def replay_buffer(log: SessionLog):
    """Recompute (last download end, final buffer, total stall) from the records alone."""
    Q = 0.0
    stall = 0.0
    t = 0.0
    for r in log.records:
        stall += max(r.duration - Q * log.chunk_duration, 0.0)
        Q = step_buffer(Q, r.duration, r.kind == "download", log.chunk_duration)
        t = r.t_start + r.duration
    return t, Q, stall
