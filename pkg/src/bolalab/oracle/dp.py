from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import List, Optional

from ..errors import OracleError, ParameterError, ResourceError, StallError
from ..model import VideoManifest
from ..simulator import NetworkTrace, transfer_time
from . import _kernel_py

DEFAULT_MAX_STATES = 5_000_000
BRUTE_FORCE_LIMIT = 10**6


@dataclass
class DpResult:
    value: float  # r*, utility per second
    levels: List[int]
    times: List[float]  # download finish time per chunk, s
    buffers: List[float]  # buffer after each download, s
    delta: float
    b_max: float
    backend: str = ""
    extras: dict = field(default_factory=dict)


def _units(value, delta, what):
    k = round(value / delta)
    if k <= 0 or abs(k * delta - value) > 1e-9 * max(1.0, abs(value)):
        raise ParameterError(f"{what}={value} is not a positive integer multiple of delta={delta}")
    return int(k)


def _kernel_module(backend):
    from . import _active, _compiled

    if backend is None:
        return _active
    if backend == "python":
        return _kernel_py
    if backend == "compiled":
        if _compiled is None:
            raise OracleError("compiled DP kernel is not available")
        return _compiled
    raise ParameterError(f"unknown backend {backend!r}")


def offline_optimal(manifest: VideoManifest, trace: NetworkTrace, gamma_p, delta=0.1, b_max=None,
                    credit_chunk=True, prune=None, max_states=DEFAULT_MAX_STATES,
                    backend: Optional[str] = None) -> DpResult:
    """Upper bound r* on the time-average utility any player can reach.

    Time and buffer live on a ``delta`` grid; download times are rounded
    down and taken from the earliest-finishing request instant at or after
    the state's time, so the result bounds every policy whose buffer stays
    within ``b_max`` seconds.  ``credit_chunk=False`` reproduces the buffer
    update without the +p credit for comparison.
    """
    p = manifest.chunk_duration
    if not delta > 0:
        raise ParameterError("delta must be positive")
    if b_max is None:
        raise ParameterError("b_max (seconds) is required")
    p_u = _units(p, delta, "chunk duration")
    bmax_u = _units(b_max, delta, "b_max")
    if bmax_u < p_u:
        raise ParameterError("b_max must hold at least one chunk")
    utilities = manifest.utilities
    if prune is None:
        prune = min(utilities) >= 0
    elif prune and min(utilities) < 0:
        raise ParameterError("dominance pruning needs non-negative utilities")
    gamma = gamma_p / p
    sizes = [manifest.chunk_sizes(n) for n in range(1, manifest.chunk_count + 1)]
    kernel = _kernel_module(backend)
    tr = _kernel_py.TraceArrays(trace)
    try:
        value, path = kernel.run_dp(sizes, utilities, p_u, bmax_u, float(delta), float(gamma),
                                    bool(credit_chunk), tr, bool(prune), int(max_states))
    except MemoryError as exc:
        raise ResourceError(
            f"DP layer grew past {max_states} states ({exc}); try a coarser delta than {delta}"
        ) from None
    except ArithmeticError as exc:
        raise OracleError(str(exc)) from None
    name = "python" if kernel is _kernel_py else "compiled"
    return DpResult(
        value=value,
        levels=[m for m, _, _ in path],
        times=[t * delta for _, t, _ in path],
        buffers=[b * delta for _, _, b in path],
        delta=delta,
        b_max=b_max,
        backend=name,
    )


def path_value(manifest: VideoManifest, trace: NetworkTrace, gamma_p, levels, b_max):
    """Exact continuous-time value of downloading ``levels`` back to back.

    Same accounting as the DP: a download that would overflow ``b_max`` is
    stretched until the chunk fits, and all time the buffer cannot cover is
    a stall.  Returns (value, finish time, final buffer s, stall s).
    """
    p = manifest.chunk_duration
    gamma = gamma_p / p
    u = manifest.utilities
    t = b = stall = util = 0.0
    for n, m in enumerate(levels, start=1):
        end = transfer_time(trace, t, manifest.level(m).size(n), chunk=n)
        x = max(end - t, b + p - b_max)
        y = max(x - b, 0.0)
        t += x
        b = b - x + y + p
        stall += y
        util += u[m - 1]
    return (util - gamma * stall) / (t + b), t, b, stall


def brute_force_optimal(manifest: VideoManifest, trace: NetworkTrace, gamma_p, b_max=None):
    """Exhaustive search over every bitrate sequence (tiny instances only)."""
    M, N = manifest.level_count, manifest.chunk_count
    if M**N > BRUTE_FORCE_LIMIT:
        raise ResourceError(f"{M}^{N} sequences exceed the brute-force limit of {BRUTE_FORCE_LIMIT}")
    if b_max is None:
        b_max = math.inf
    best, best_seq = -math.inf, None
    for seq in itertools.product(range(1, M + 1), repeat=N):
        try:
            v = path_value(manifest, trace, gamma_p, seq, b_max)[0]
        except StallError:
            continue
        if v > best:
            best, best_seq = v, list(seq)
    if best_seq is None:
        raise OracleError("no bitrate sequence can finish on this trace")
    return best, best_seq
