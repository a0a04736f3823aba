"""Network profiles, trace files and synthetic VBR manifests."""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import numpy as np

from .errors import InvalidManifestError, ParameterError, TraceParseError
from .model import VideoManifest, build_manifest
from .simulator import NetworkTrace, Segment

log = logging.getLogger(__name__)

STAGE_SECONDS = 30.0
DEFAULT_LATENCY_MS = 50.0
TRACE_HEADER = ("duration_s", "bandwidth_kbps", "latency_ms")

# DASH-IF network profiles 1-11 (odd): (Mbps, one-way latency ms) per 30 s stage
_ODD_PROFILES = {
    1: [(5.0, 38), (4.0, 50), (3.0, 75), (2.0, 88), (1.5, 100), (2.0, 88), (3.0, 75), (4.0, 50)],
    3: [(5.0, 13), (4.0, 18), (3.0, 28), (2.0, 58), (1.5, 200), (2.0, 58), (3.0, 28), (4.0, 18)],
    5: [(5.0, 11), (4.0, 13), (3.0, 15), (2.0, 20), (1.5, 25), (2.0, 20), (3.0, 15), (4.0, 13)],
    7: [(9.0, 25), (4.0, 50), (2.0, 75), (1.0, 100), (2.0, 75), (4.0, 50)],
    9: [(9.0, 10), (4.0, 50), (2.0, 150), (1.0, 200), (2.0, 150), (4.0, 50)],
    11: [(9.0, 6), (4.0, 13), (2.0, 20), (1.0, 25), (2.0, 20), (4.0, 13)],
}

# Big Buck Bunny ladder: mean and standard deviation of the chunk size (Mb), p = 3 s
LADDER_STATS = [
    (18.00, 3.232),
    (15.08, 2.673),
    (8.886, 1.691),
    (6.168, 1.182),
    (4.281, 0.825),
    (2.973, 0.545),
    (2.064, 0.360),
    (1.431, 0.287),
    (0.993, 0.162),
    (0.690, 0.113),
]
LADDER_UTILITIES = [3.261, 3.084, 2.556, 2.190, 1.825, 1.461, 1.096, 0.729, 0.364, 0.000]

# five-level ladder of the worked example (chunk sizes in Mb, p = 3 s)
EXAMPLE_LADDER_MB = [18.00, 8.886, 4.281, 2.064, 0.993]


def profile_stages(profile_id: int):
    """(bandwidth Mbps, latency ms) stages of a DASH-IF profile, in playing order."""
    if not 1 <= profile_id <= 12:
        raise ParameterError(f"profile id must be 1..12 (got {profile_id})")
    if profile_id % 2:
        return list(_ODD_PROFILES[profile_id])
    stages = _ODD_PROFILES[profile_id - 1]
    low = min(range(len(stages)), key=lambda i: stages[i][0])
    return stages[low:] + stages[:low]


def gen_profile(profile_id: int) -> NetworkTrace:
    segments = [
        Segment(STAGE_SECONDS, mbps * 1e6, ms / 1000.0) for mbps, ms in profile_stages(profile_id)
    ]
    return NetworkTrace(segments, cyclic=True)


def save_trace(trace: NetworkTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for seg in trace.segments:
            w.writerow([repr(seg.duration), repr(seg.bandwidth / 1000.0), repr(seg.latency * 1000.0)])


def load_trace(path, default_latency_ms=DEFAULT_LATENCY_MS, cyclic=True, min_bitrate=None) -> NetworkTrace:
    """Parse a ``duration_s,bandwidth_kbps[,latency_ms]`` file.

    A header row is optional.  ``min_bitrate`` (bits/s) triggers a warning
    when the trace averages below it.
    """
    segments = []
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    for lineno, row in enumerate(rows, start=1):
        cells = [c.strip() for c in row]
        if not cells or all(c == "" for c in cells) or cells[0].startswith("#"):
            continue
        if lineno == 1 and not _is_number(cells[0]):
            continue
        if len(cells) not in (2, 3):
            raise TraceParseError(f"expected 2 or 3 fields, got {len(cells)}", lineno)
        try:
            duration = float(cells[0])
            kbps = float(cells[1])
            latency_ms = float(cells[2]) if len(cells) == 3 else default_latency_ms
        except ValueError:
            raise TraceParseError(f"non-numeric field in {row!r}", lineno) from None
        if not duration > 0 or kbps < 0 or latency_ms < 0:
            raise TraceParseError("durations must be positive, bandwidth and latency non-negative", lineno)
        segments.append(Segment(duration, kbps * 1000.0, latency_ms / 1000.0))
    if not segments:
        raise TraceParseError(f"{path}: no trace rows")
    trace = NetworkTrace(segments, cyclic=cyclic)
    if min_bitrate is not None and trace.mean_bandwidth() < min_bitrate:
        log.warning(
            "%s: mean bandwidth %.0f kbps is below the lowest bitrate %.0f kbps",
            path, trace.mean_bandwidth() / 1000, min_bitrate / 1000,
        )
    return trace


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def _truncated_normals(rng, count, bound=3.0):
    z = rng.standard_normal(count)
    bad = np.abs(z) > bound
    while bad.any():
        z[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(z) > bound
    return z


def gen_vbr_manifest(chunk_count, chunk_duration, stats, seed, utilities=None) -> VideoManifest:
    """Synthesize per-chunk sizes around per-level (mean, std) statistics (bits).

    One standard-normal draw per chunk, truncated at +-3, is shared by all
    levels so that scene complexity moves every level together.  Sizes are
    floored at 10% of the mean and each chunk's column is sorted so larger
    levels stay larger.  Utilities default to ln(mean_m / mean_M).
    """
    if chunk_count < 1:
        raise ParameterError("chunk count must be at least 1")
    means = np.array([s[0] for s in stats], dtype=float)
    stds = np.array([s[1] for s in stats], dtype=float)
    if np.any(means <= 0) or np.any(stds < 0):
        raise InvalidManifestError("means must be positive and standard deviations non-negative")
    if np.any(np.diff(means) > 0):
        raise InvalidManifestError("level means must be non-increasing in level index")
    rng = np.random.default_rng(seed)
    z = _truncated_normals(rng, chunk_count)
    sizes = means[:, None] + stds[:, None] * z[None, :]
    sizes = np.maximum(sizes, 0.1 * means[:, None])
    sizes = -np.sort(-sizes, axis=0)
    return build_manifest(
        chunk_duration,
        sizes.tolist(),
        utilities=utilities,
        bitrates=(means / chunk_duration).tolist(),
        mean_sizes=means.tolist(),
    )


def reference_manifest(chunk_count=200, seed=42, chunk_duration=3.0) -> VideoManifest:
    """Seeded VBR stand-in for the 10-level test movie."""
    stats = [(m * 1e6, s * 1e6) for m, s in LADDER_STATS]
    return gen_vbr_manifest(chunk_count, chunk_duration, stats, seed)


def example_manifest(chunk_count=33, chunk_duration=3.0) -> VideoManifest:
    """Constant-size five-level ladder of the worked example."""
    sizes = [[mb * 1e6] * chunk_count for mb in EXAMPLE_LADDER_MB]
    return build_manifest(chunk_duration, sizes)


def synthetic_trace(seed, segments=20, mean_duration=20.0, low_kbps=300.0, high_kbps=8000.0,
                    latency_ms=(10.0, 150.0), cyclic=True) -> NetworkTrace:
    """Random piecewise-constant trace with log-uniform bandwidths."""
    rng = np.random.default_rng(seed)
    durations = rng.exponential(mean_duration, segments) + 1.0
    bws = np.exp(rng.uniform(np.log(low_kbps), np.log(high_kbps), segments)) * 1000.0
    lats = rng.uniform(latency_ms[0], latency_ms[1], segments) / 1000.0
    return NetworkTrace(
        [Segment(float(d), float(b), float(lt)) for d, b, lt in zip(durations, bws, lats)], cyclic=cyclic
    )
