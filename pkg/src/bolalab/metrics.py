"""Scores computed from a session log, and report writers."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, List, Mapping, Optional, Sequence

from .model import VideoManifest
from .simulator import SessionLog, replay_buffer

REPORT_SCHEMA = "bolalab.report/1"


@dataclass
class Metrics:
    playback_utility: float  # per second
    smoothness: float  # N p / T_end
    joint: float
    oracle_form: float  # per second, comparable with the DP's r*
    avg_bitrate: float  # Mbps, nominal
    avg_bitrate_change: float  # Mbps
    rebuffer_to_play: float
    startup_delay: float
    mid_stream_rebuffer: float
    total_rebuffer: float
    t_end: float
    last_download_end: float
    final_buffer_s: float
    max_buffer_s: float
    chunks_played: int
    abandonments: int
    wasted_bits: float
    partial: bool = False

    def as_dict(self) -> dict:
        return asdict(self)


METRIC_FIELDS = tuple(f.name for f in fields(Metrics))


def compute(log: SessionLog, manifest: VideoManifest, gamma_p: float) -> Metrics:
    """Recompute every score from the records, ignoring the simulator's running totals."""
    p = manifest.chunk_duration
    gamma = gamma_p / p
    downloads = [r for r in log.records if r.kind == "download"]
    levels = [r.m for r in downloads]
    partial = len(downloads) != manifest.chunk_count
    last_end, final_q, stall = replay_buffer(log)
    t_end = last_end + final_q * p
    startup = 0.0
    for r in log.records:
        startup += r.rebuffer
        if r.kind == "download":
            break
    u = manifest.utilities
    util = math.fsum(u[m - 1] for m in levels)
    n_played = len(downloads)
    rates = [manifest.level(m).nominal_bitrate / 1e6 for m in levels]
    changes = [abs(b - a) for a, b in zip(rates, rates[1:])]
    wasted = [r.bits for r in log.records if r.kind == "abandoned"]
    if t_end > 0:
        pu = util / t_end
        smooth = n_played * p / t_end
        oracle_form = (util - gamma * stall) / t_end
    else:
        pu = smooth = oracle_form = 0.0
    mid = stall - startup
    return Metrics(
        playback_utility=pu,
        smoothness=smooth,
        joint=pu + gamma * smooth,
        oracle_form=oracle_form,
        avg_bitrate=math.fsum(rates) / n_played if n_played else 0.0,
        avg_bitrate_change=math.fsum(changes) / len(changes) if changes else 0.0,
        rebuffer_to_play=mid / (n_played * p) if n_played else 0.0,
        startup_delay=startup,
        mid_stream_rebuffer=mid,
        total_rebuffer=stall,
        t_end=t_end,
        last_download_end=last_end,
        final_buffer_s=final_q * p,
        max_buffer_s=log.max_buffer * p,
        chunks_played=n_played,
        abandonments=len(wasted),
        wasted_bits=math.fsum(wasted),
        partial=partial,
    )


def steady_state_change(levels: Sequence[int], manifest: VideoManifest, start=0.25, stop=0.75) -> float:
    """Mean |bitrate step| (Mbps) over the middle of the session, skipping start-up and wind-down."""
    lo, hi = int(len(levels) * start), int(len(levels) * stop)
    rates = [manifest.level(m).nominal_bitrate / 1e6 for m in levels[lo:hi]]
    steps = [abs(b - a) for a, b in zip(rates, rates[1:])]
    return math.fsum(steps) / len(steps) if steps else 0.0


def _cell(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return "" if value is None else str(value)


def rows_to_csv(rows: Sequence[Mapping], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def emit(rows: Iterable[Mapping], fmt: str = "csv", keys: Sequence[str] = (), header: Optional[Mapping] = None,
         extra: Sequence[str] = ()) -> str:
    """Render report rows as CSV or JSON text.

    ``keys`` lead each row (e.g. profile, variant), metric fields follow in
    declaration order, then ``extra`` columns such as a comparison ratio.
    The JSON form carries the schema tag and ``header``; the CSV form puts
    the header in leading ``#`` comment lines.
    """
    rows = [dict(r) for r in rows]
    columns = list(keys) + [f for f in METRIC_FIELDS if any(f in r for r in rows)] + list(extra)
    header = dict(header or {})
    if fmt == "csv":
        lines = [f"# schema={REPORT_SCHEMA}"] + [f"# {k}={header[k]}" for k in header]
        return "\n".join(lines) + "\n" + rows_to_csv(rows, columns)
    if fmt == "json":
        doc = {"schema": REPORT_SCHEMA, "header": header, "columns": columns,
               "rows": [{c: row.get(c) for c in columns} for row in rows]}
        return json.dumps(doc, indent=2, allow_nan=True) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def metrics_row(metrics: Metrics, **keys) -> dict:
    row = dict(keys)
    row.update(metrics.as_dict())
    return row


def check_identities(metrics: Metrics, gamma_p: float, chunk_duration: float, tol=1e-9) -> List[str]:
    """Accounting identities every complete session must satisfy; returns the failures."""
    gamma = gamma_p / chunk_duration
    bad = []
    expect_t = metrics.chunks_played * chunk_duration + metrics.total_rebuffer
    if abs(metrics.t_end - expect_t) > tol * max(1.0, metrics.t_end):
        bad.append(f"T_end {metrics.t_end!r} != N p + stall {expect_t!r}")
    if abs(metrics.joint - gamma - metrics.oracle_form) > tol * max(1.0, abs(metrics.joint)):
        bad.append(f"joint - gamma {metrics.joint - gamma!r} != oracle_form {metrics.oracle_form!r}")
    if metrics.smoothness > 1 + tol:
        bad.append(f"smoothness {metrics.smoothness!r} > 1")
    return bad
