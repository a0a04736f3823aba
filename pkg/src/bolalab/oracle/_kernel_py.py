"""Pure-Python DP kernel.  Must stay arithmetically identical to _kernel.pyx."""

import math

import numpy as np

NEG_INF = -math.inf


class TraceArrays:
    """Flat view of a NetworkTrace used by both kernels."""

    __slots__ = ("starts", "durs", "bws", "lats", "cum", "period", "period_bits", "cyclic", "K")

    def __init__(self, trace):
        self.starts = [float(x) for x in trace.starts]
        self.durs = [float(s.duration) for s in trace.segments]
        self.bws = [float(s.bandwidth) for s in trace.segments]
        self.lats = [float(s.latency) for s in trace.segments]
        self.cum = [float(x) for x in trace.cum]
        self.period = float(trace.period)
        self.period_bits = float(trace.period_bits)
        self.cyclic = bool(trace.cyclic)
        self.K = len(self.durs)


def _locate(tr, t):
    if tr.cyclic:
        q = math.floor(t / tr.period)
        r = t - q * tr.period
        if r >= tr.period:
            q += 1
            r = 0.0
    else:
        if t >= tr.period:
            return 0, tr.K, t - tr.period
        q, r = 0, t
    lo, hi = 0, tr.K
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tr.starts[mid] <= r:
            lo = mid
        else:
            hi = mid
    return q, lo, r - tr.starts[lo]


def _cum(tr, t):
    q, k, off = _locate(tr, t)
    if k == tr.K:
        return tr.period_bits
    return q * tr.period_bits + tr.cum[k] + off * tr.bws[k]


def _inv(tr, target):
    if target <= 0:
        return 0.0
    q = 0
    rem = target
    if tr.cyclic:
        q = math.floor(target / tr.period_bits)
        rem = target - q * tr.period_bits
        if rem <= 0:
            q -= 1
            rem = tr.period_bits
    elif target > tr.period_bits:
        return math.inf
    # first segment whose end-cumulative reaches rem
    lo, hi = 0, tr.K - 1
    while lo < hi:
        mid = (lo + hi) // 2
        end = tr.cum[mid + 1] if mid + 1 < tr.K else tr.period_bits
        if end >= rem:
            hi = mid
        else:
            lo = mid + 1
    k = lo
    while tr.bws[k] <= 0:
        k += 1
    off = (rem - tr.cum[k]) / tr.bws[k]
    if off < 0:
        off = 0.0
    if off > tr.durs[k]:
        off = tr.durs[k]
    return q * tr.period + tr.starts[k] + off


def finish(tr, t0, bits):
    q, k, _ = _locate(tr, t0)
    lat = tr.lats[k] if k < tr.K else tr.lats[tr.K - 1]
    fs = t0 + lat
    end = _inv(tr, _cum(tr, fs) + bits)
    return end if end > fs else fs


def _next_boundary(tr, t):
    q, k, _ = _locate(tr, t)
    if k == tr.K:
        return math.inf
    nxt = q * tr.period + tr.starts[k] + tr.durs[k]
    if nxt <= t:
        nxt = t + tr.durs[k]
    if not tr.cyclic and nxt >= tr.period:
        return tr.period if tr.period > t else math.inf
    return nxt


def finish_env(tr, t0, bits):
    """Earliest completion over all request instants >= t0.

    Finish time only decreases with a later start where the latency drops at
    a segment boundary, so it is enough to try the boundaries before the
    current best.
    """
    best = finish(tr, t0, bits)
    beta = _next_boundary(tr, t0)
    while beta < best:
        f = finish(tr, beta, bits)
        if f < best:
            best = f
        beta = _next_boundary(tr, beta)
    return best


def run_dp(sizes, utilities, p_u, bmax_u, delta, gamma, credit, tr, prune, max_states):
    """Layered DP over (time, buffer) in units of delta.

    Returns (best ratio, path) where path is a list of (m, t_units, b_units)
    per chunk, m 1-based.  Raises MemoryError past ``max_states`` states in a
    layer.
    """
    N = len(sizes)
    M = len(utilities)
    bcap = bmax_u
    T = np.zeros(1, dtype=np.int64)
    B = np.zeros(1, dtype=np.int64)
    R = np.zeros(1, dtype=np.float64)
    layers = []
    for n in range(1, N + 1):
        row = sizes[n - 1]
        S = len(T)
        cand_t, cand_b, cand_r, cand_parent, cand_m = [], [], [], [], []
        last_t = -1
        fin = [0.0] * M
        for s in range(S):
            t = int(T[s])
            b = int(B[s])
            r = float(R[s])
            if t != last_t:
                tsec = t * delta
                for m in range(M):
                    fin[m] = finish_env(tr, tsec, row[m])
                last_t = t
            for m in range(M):
                if fin[m] == math.inf:
                    continue
                x = fin[m] - t * delta
                xq = int(math.floor(x / delta))
                if xq < 0:
                    xq = 0
                cap = b + p_u - bcap
                xp = xq if xq > cap else cap
                y = xp - b
                if y < 0:
                    y = 0
                cand_t.append(t + xp)
                cand_b.append(b - xp + y + (p_u if credit else 0))
                cand_r.append(r + utilities[m] - gamma * (y * delta))
                cand_parent.append(s)
                cand_m.append(m)
        if not cand_t:
            raise ArithmeticError(f"no feasible download for chunk {n}")
        ct = np.array(cand_t, dtype=np.int64)
        cb = np.array(cand_b, dtype=np.int64)
        cr = np.array(cand_r, dtype=np.float64)
        t_lo = int(ct.min())
        t_hi = int(ct.max())
        width = t_hi - t_lo + 1
        grid_r = np.full((width, bcap + 1), NEG_INF)
        grid_c = np.full((width, bcap + 1), -1, dtype=np.int64)
        # first candidate wins exact ties, matching the compiled kernel
        for c in range(len(cand_t)):
            i = ct[c] - t_lo
            j = cb[c]
            if cr[c] > grid_r[i, j]:
                grid_r[i, j] = cr[c]
                grid_c[i, j] = c
        keep = grid_c >= 0
        if prune:
            credit_u = n * p_u if credit else 0
            tt = (np.arange(width) + t_lo)[:, None]
            bb = np.arange(bcap + 1)[None, :]
            U = np.where(keep, grid_r + gamma * ((tt + bb - credit_u) * delta), NEG_INF)
            prev = np.full(bcap + 1, NEG_INF)
            for i in range(width):
                shifted = np.empty(bcap + 1)
                shifted[:-1] = prev[1:]
                shifted[-1] = prev[-1]
                # best U among states with t' <= t, E' <= E, excluding the cell itself
                left = np.maximum.accumulate(np.maximum(U[i], shifted))
                dom = np.maximum(shifted, np.concatenate(([NEG_INF], left[:-1])))
                keep[i] &= ~(dom >= U[i])
                prev = left
        idx_t, idx_b = np.nonzero(keep)
        if len(idx_t) > max_states:
            raise MemoryError(len(idx_t))
        chosen = grid_c[idx_t, idx_b]
        T = (idx_t + t_lo).astype(np.int64)
        B = idx_b.astype(np.int64)
        R = grid_r[idx_t, idx_b]
        parents = np.array(cand_parent, dtype=np.int64)[chosen]
        ms = np.array(cand_m, dtype=np.int64)[chosen]
        layers.append((T, B, parents, ms))
    best, best_s = NEG_INF, -1
    for s in range(len(T)):
        e = (T[s] + B[s]) * delta
        if e <= 0:
            continue
        v = R[s] / e
        if v > best:
            best, best_s = v, s
    if best_s < 0:
        raise ArithmeticError("no terminal state with positive playback time")
    path = []
    s = best_s
    for n in range(N - 1, -1, -1):
        T_n, B_n, par, ms = layers[n]
        path.append((int(ms[s]) + 1, int(T_n[s]), int(B_n[s])))
        s = int(par[s])
    path.reverse()
    return float(best), path
