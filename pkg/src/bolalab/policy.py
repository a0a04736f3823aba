"""Decision rules for the BOLA variants.

Everything here is a pure function of explicit inputs.  Buffer levels are in
chunks; sizes in bits; bandwidth in bits/s.  Level indices are 1-based with
1 the highest bitrate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .model import Variant


@dataclass(frozen=True)
class Download:
    m: int


@dataclass(frozen=True)
class SleepUntilBufferBelow:
    threshold: float  # chunks


@dataclass(frozen=True)
class PauseFor:
    duration: float  # seconds
    then: Download


Decision = Union[Download, SleepUntilBufferBelow, PauseFor]


@dataclass
class PolicyState:
    previous_choice: Optional[int] = None
    measured_bandwidth: Optional[float] = None


def score(utility, Q, V, gamma_p, size):
    """Drift-plus-penalty ratio (V*u + V*gamma_p - Q) / S for one level."""
    return (V * utility + V * gamma_p - Q) / size


def _argmax_level(Q, V, gamma_p, sizes, utilities, candidates=None):
    best_m, best = None, None
    if candidates is None:
        candidates = range(1, len(sizes) + 1)
    for m in candidates:
        s = (V * utilities[m - 1] + V * gamma_p - Q) / sizes[m - 1]
        # strict '>' keeps the smallest index on ties
        if best is None or s > best:
            best_m, best = m, s
    return best_m, best


def no_download_cutoff(V, gamma_p, top_utility):
    return V * (top_utility + gamma_p)


def bola_basic_decide(Q, V, gamma_p, sizes: Sequence[float], utilities: Sequence[float]) -> Decision:
    """One BOLA step for a chunk whose per-level sizes are ``sizes``.

    Above the cutoff V(u_1 + gamma_p) every ratio is negative and the player
    waits until the buffer drains to the cutoff.  At or below it the level
    with the largest ratio is downloaded.
    """
    cutoff = no_download_cutoff(V, gamma_p, utilities[0])
    if Q > cutoff:
        return SleepUntilBufferBelow(cutoff)
    m, _ = _argmax_level(Q, V, gamma_p, sizes, utilities)
    return Download(m)


def decision_thresholds(V, gamma_p, sizes: Sequence[float], utilities: Sequence[float]) -> list:
    """Buffer levels (chunks) bounding each level's region of the decision map.

    Returns ``thr`` of length M + 1.  Level m is chosen for
    ``thr[M - m] <= Q < thr[M - m + 1]``; level 1 also at the cutoff
    ``thr[M]``.  Levels that are never chosen get zero-width regions.
    """
    M = len(sizes)
    c = [V * (u + gamma_p) for u in utilities]
    cutoff = c[0]
    start = [0.0] * (M + 2)  # start[m]: lowest Q at which level m is chosen
    cur, _ = _argmax_level(0.0, V, gamma_p, sizes, utilities)
    q = 0.0
    while cur > 1:
        nxt, q_next = None, None
        for j in range(1, cur):
            if sizes[j - 1] == sizes[cur - 1]:
                continue
            # a larger chunk has a flatter line and overtakes at this level
            cross = (sizes[j - 1] * c[cur - 1] - sizes[cur - 1] * c[j - 1]) / (sizes[j - 1] - sizes[cur - 1])
            if q_next is None or cross < q_next:
                nxt, q_next = j, cross
        if nxt is None or q_next >= cutoff:
            break
        q = max(q_next, q)
        for m in range(nxt + 1, cur):
            start[m] = q
        cur = nxt
        start[cur] = q
    for m in range(1, cur):
        start[m] = cutoff
    return [start[M - i] for i in range(M)] + [cutoff]


def level_from_thresholds(thresholds: Sequence[float], Q: float) -> Optional[int]:
    """Read the decision map produced by :func:`decision_thresholds`.

    Returns None above the cutoff (no download).
    """
    M = len(thresholds) - 1
    if Q > thresholds[M]:
        return None
    i = 0
    for j in range(M):
        if thresholds[j] <= Q:
            i = j
    # zero-width regions collapse onto the highest index with thr <= Q
    return M - i


def dynamic_v(playtime_from_begin, playtime_to_end, buffer_chunks, top_utility, gamma_p, p,
              minimum_buffer_chunks=3.0):
    """Buffer target and V shrunk near the start and end of the video.

    Returns (Q_max^D, V^D).
    """
    t = min(playtime_from_begin, playtime_to_end)
    t_prime = max(t / 2.0, minimum_buffer_chunks * p)
    q_dyn = min(buffer_chunks, t_prime / p)
    return q_dyn, (q_dyn - 1) / (top_utility + gamma_p)


def sustainable_level(r, sizes, p):
    """Smallest index whose chunk rate S_m/p fits under max(r, S_M/p)."""
    limit = max(r, sizes[-1] / p)
    for m, s in enumerate(sizes, start=1):
        if s / p <= limit:
            return m
    return len(sizes)


def crossing_level(V, gamma_p, sizes, utilities, m):
    """Buffer level where levels m and m-1 score equally."""
    s_lo, s_hi = sizes[m - 1], sizes[m - 2]
    c_lo = V * (utilities[m - 1] + gamma_p)
    c_hi = V * (utilities[m - 2] + gamma_p)
    if s_hi == s_lo:
        return float("inf") if c_lo >= c_hi else float("-inf")
    return (s_hi * c_lo - s_lo * c_hi) / (s_hi - s_lo)


def oscillation_guard(m_new, m_prev, r, sizes, utilities, p, variant, V, gamma_p, Q) -> Decision:
    """Cap an up-switch by the bandwidth measured on the previous download.

    Only meaningful when ``m_new < m_prev``; otherwise the choice stands.
    BOLA-O waits for the buffer to slip to the m'/m'-1 crossing before
    downloading m'; BOLA-U goes one level above the sustainable one.
    """
    if variant not in (Variant.O, Variant.U) or m_prev is None or m_new >= m_prev or r is None:
        return Download(m_new)
    m_cap = sustainable_level(r, sizes, p)
    if m_cap <= m_new:
        return Download(m_new)
    if m_cap > m_prev:
        return Download(m_prev)
    if variant is Variant.U:
        return Download(m_cap - 1)
    q_cross = crossing_level(V, gamma_p, sizes, utilities, m_cap)
    drain = max(Q - q_cross, 0.0)
    # never wait past an empty buffer
    drain = min(drain, Q)
    return PauseFor(drain * p, Download(m_cap))


def shall_abandon(m, remaining, Q, V, gamma_p, sizes, utilities) -> Optional[Download]:
    """Switch target for an in-flight download, or None to keep going.

    ``remaining`` is the number of bits still to fetch at level ``m``;
    ``sizes`` are the full sizes of the same chunk at every level.
    """
    M = len(sizes)
    if m >= M or remaining <= 0:
        return None
    if Q >= no_download_cutoff(V, gamma_p, utilities[0]):
        # every score is negative here; the player would not start a download either
        return None
    current = (V * utilities[m - 1] + V * gamma_p - Q) / remaining
    best_m, best = _argmax_level(Q, V, gamma_p, sizes, utilities, range(m + 1, M + 1))
    if best > current:
        return Download(best_m)
    return None


def throughput_rule(r, sizes, p, safety=0.9):
    """Highest level whose rate fits under a fraction of the measured throughput."""
    if r is None:
        return len(sizes)
    return sustainable_level(r * safety, sizes, p)
