# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled DP kernel.  Same algorithm and arithmetic order as _kernel_py."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, INFINITY

cnp.import_array()


cdef struct Trace:
    double *starts
    double *durs
    double *bws
    double *lats
    double *cum
    double period
    double period_bits
    int cyclic
    int K


cdef inline void _locate(Trace *tr, double t, long *q_out, int *k_out, double *off_out) noexcept nogil:
    cdef double q, r
    cdef int lo, hi, mid
    if tr.cyclic:
        q = floor(t / tr.period)
        r = t - q * tr.period
        if r >= tr.period:
            q += 1
            r = 0.0
    else:
        if t >= tr.period:
            q_out[0] = 0
            k_out[0] = tr.K
            off_out[0] = t - tr.period
            return
        q = 0
        r = t
    lo = 0
    hi = tr.K
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tr.starts[mid] <= r:
            lo = mid
        else:
            hi = mid
    q_out[0] = <long>q
    k_out[0] = lo
    off_out[0] = r - tr.starts[lo]


cdef inline double _cum(Trace *tr, double t) noexcept nogil:
    cdef long q
    cdef int k
    cdef double off
    _locate(tr, t, &q, &k, &off)
    if k == tr.K:
        return tr.period_bits
    return q * tr.period_bits + tr.cum[k] + off * tr.bws[k]


cdef inline double _inv(Trace *tr, double target) noexcept nogil:
    cdef double q = 0, rem, end, off
    cdef int lo, hi, mid, k
    if target <= 0:
        return 0.0
    rem = target
    if tr.cyclic:
        q = floor(target / tr.period_bits)
        rem = target - q * tr.period_bits
        if rem <= 0:
            q -= 1
            rem = tr.period_bits
    elif target > tr.period_bits:
        return INFINITY
    lo = 0
    hi = tr.K - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if mid + 1 < tr.K:
            end = tr.cum[mid + 1]
        else:
            end = tr.period_bits
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


cdef inline double _finish(Trace *tr, double t0, double bits) noexcept nogil:
    cdef long q
    cdef int k
    cdef double off, lat, fs, end
    _locate(tr, t0, &q, &k, &off)
    if k < tr.K:
        lat = tr.lats[k]
    else:
        lat = tr.lats[tr.K - 1]
    fs = t0 + lat
    end = _inv(tr, _cum(tr, fs) + bits)
    if end > fs:
        return end
    return fs


cdef inline double _next_boundary(Trace *tr, double t) noexcept nogil:
    cdef long q
    cdef int k
    cdef double off, nxt
    _locate(tr, t, &q, &k, &off)
    if k == tr.K:
        return INFINITY
    nxt = q * tr.period + tr.starts[k] + tr.durs[k]
    if nxt <= t:
        nxt = t + tr.durs[k]
    if not tr.cyclic and nxt >= tr.period:
        if tr.period > t:
            return tr.period
        return INFINITY
    return nxt


cdef inline double _finish_env(Trace *tr, double t0, double bits) noexcept nogil:
    cdef double best = _finish(tr, t0, bits)
    cdef double beta = _next_boundary(tr, t0)
    cdef double f
    while beta < best:
        f = _finish(tr, beta, bits)
        if f < best:
            best = f
        beta = _next_boundary(tr, beta)
    return best


def finish_env(tr_py, double t0, double bits):
    """Exposed for cross-checking against the Python kernel."""
    cdef double[::1] starts = np.ascontiguousarray(tr_py.starts, dtype=np.float64)
    cdef double[::1] durs = np.ascontiguousarray(tr_py.durs, dtype=np.float64)
    cdef double[::1] bws = np.ascontiguousarray(tr_py.bws, dtype=np.float64)
    cdef double[::1] lats = np.ascontiguousarray(tr_py.lats, dtype=np.float64)
    cdef double[::1] cum = np.ascontiguousarray(tr_py.cum, dtype=np.float64)
    cdef Trace tr
    tr.starts = &starts[0]
    tr.durs = &durs[0]
    tr.bws = &bws[0]
    tr.lats = &lats[0]
    tr.cum = &cum[0]
    tr.period = tr_py.period
    tr.period_bits = tr_py.period_bits
    tr.cyclic = 1 if tr_py.cyclic else 0
    tr.K = tr_py.K
    return _finish_env(&tr, t0, bits)


def run_dp(sizes, utilities, long p_u, long bmax_u, double delta, double gamma, bint credit,
           tr_py, bint prune, long max_states):
    cdef double[:, ::1] sz = np.ascontiguousarray(sizes, dtype=np.float64)
    cdef double[::1] util = np.ascontiguousarray(utilities, dtype=np.float64)
    cdef double[::1] starts = np.ascontiguousarray(tr_py.starts, dtype=np.float64)
    cdef double[::1] durs = np.ascontiguousarray(tr_py.durs, dtype=np.float64)
    cdef double[::1] bws = np.ascontiguousarray(tr_py.bws, dtype=np.float64)
    cdef double[::1] lats = np.ascontiguousarray(tr_py.lats, dtype=np.float64)
    cdef double[::1] cumv = np.ascontiguousarray(tr_py.cum, dtype=np.float64)
    cdef Trace tr
    tr.starts = &starts[0]
    tr.durs = &durs[0]
    tr.bws = &bws[0]
    tr.lats = &lats[0]
    tr.cum = &cumv[0]
    tr.period = tr_py.period
    tr.period_bits = tr_py.period_bits
    tr.cyclic = 1 if tr_py.cyclic else 0
    tr.K = tr_py.K

    cdef Py_ssize_t N = sz.shape[0]
    cdef Py_ssize_t M = sz.shape[1]
    cdef long bcap = bmax_u
    cdef long pcredit = p_u if credit else 0

    cdef cnp.ndarray[cnp.int64_t, ndim=1] T_arr = np.zeros(1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] B_arr = np.zeros(1, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] R_arr = np.zeros(1, dtype=np.float64)
    cdef cnp.int64_t[::1] T = T_arr
    cdef cnp.int64_t[::1] B = B_arr
    cdef double[::1] R = R_arr

    cdef double[::1] fin = np.zeros(M, dtype=np.float64)
    cdef cnp.int64_t[::1] ct, cb, cpar, cm, gc, keep_idx
    cdef double[::1] cr, gr, prev, cur
    cdef Py_ssize_t n, s, S, m, c, nc, i, j, width, kept
    cdef long t, b, last_t, xq, cap, xp, y, t_lo, t_hi, cu
    cdef double r, x, tsec, u, shifted, left, dom, best, e, v
    layers = []

    for n in range(1, N + 1):
        S = T.shape[0]
        ct = np.empty(S * M, dtype=np.int64)
        cb = np.empty(S * M, dtype=np.int64)
        cr = np.empty(S * M, dtype=np.float64)
        cpar = np.empty(S * M, dtype=np.int64)
        cm = np.empty(S * M, dtype=np.int64)
        nc = 0
        last_t = -1
        with nogil:
            for s in range(S):
                t = T[s]
                b = B[s]
                r = R[s]
                if t != last_t:
                    tsec = t * delta
                    for m in range(M):
                        fin[m] = _finish_env(&tr, tsec, sz[n - 1, m])
                    last_t = t
                for m in range(M):
                    if fin[m] == INFINITY:
                        continue
                    x = fin[m] - t * delta
                    xq = <long>floor(x / delta)
                    if xq < 0:
                        xq = 0
                    cap = b + p_u - bcap
                    xp = xq if xq > cap else cap
                    y = xp - b
                    if y < 0:
                        y = 0
                    ct[nc] = t + xp
                    cb[nc] = b - xp + y + pcredit
                    cr[nc] = r + util[m] - gamma * (y * delta)
                    cpar[nc] = s
                    cm[nc] = m
                    nc += 1
        if nc == 0:
            raise ArithmeticError(f"no feasible download for chunk {n}")
        t_lo = ct[0]
        t_hi = ct[0]
        for c in range(nc):
            if ct[c] < t_lo:
                t_lo = ct[c]
            if ct[c] > t_hi:
                t_hi = ct[c]
        width = t_hi - t_lo + 1
        gr = np.full(width * (bcap + 1), -np.inf, dtype=np.float64)
        gc = np.full(width * (bcap + 1), -1, dtype=np.int64)
        kept = 0
        with nogil:
            for c in range(nc):
                i = (ct[c] - t_lo) * (bcap + 1) + cb[c]
                if cr[c] > gr[i]:
                    gr[i] = cr[c]
                    gc[i] = c
        prev = np.full(bcap + 1, -np.inf, dtype=np.float64)
        cur = np.empty(bcap + 1, dtype=np.float64)
        cu = n * p_u if credit else 0
        with nogil:
            for i in range(width):
                left = -INFINITY
                for j in range(bcap + 1):
                    c = i * (bcap + 1) + j
                    if gc[c] >= 0:
                        u = gr[c] + gamma * ((i + t_lo + j - cu) * delta)
                    else:
                        u = -INFINITY
                    if j < bcap:
                        shifted = prev[j + 1]
                    else:
                        shifted = prev[bcap]
                    if prune and gc[c] >= 0:
                        dom = shifted if shifted > left else left
                        if dom >= u:
                            gc[c] = -1
                    if shifted > left:
                        left = shifted
                    if u > left:
                        left = u
                    cur[j] = left
                    if gc[c] >= 0:
                        kept += 1
                for j in range(bcap + 1):
                    prev[j] = cur[j]
        if kept > max_states:
            raise MemoryError(kept)
        T_arr = np.empty(kept, dtype=np.int64)
        B_arr = np.empty(kept, dtype=np.int64)
        R_arr = np.empty(kept, dtype=np.float64)
        par_arr = np.empty(kept, dtype=np.int64)
        m_arr = np.empty(kept, dtype=np.int64)
        T = T_arr
        B = B_arr
        R = R_arr
        keep_idx = par_arr
        kept_m = m_arr
        _compact(gc, gr, cpar, cm, width, bcap, t_lo, T, B, R, keep_idx, kept_m)
        layers.append((T_arr, B_arr, par_arr, m_arr))

    best = -INFINITY
    cdef Py_ssize_t best_s = -1
    for s in range(T.shape[0]):
        e = (T[s] + B[s]) * delta
        if e <= 0:
            continue
        v = R[s] / e
        if v > best:
            best = v
            best_s = s
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


cdef void _compact(cnp.int64_t[::1] gc, double[::1] gr, cnp.int64_t[::1] cpar, cnp.int64_t[::1] cm,
                   Py_ssize_t width, long bcap, long t_lo,
                   cnp.int64_t[::1] T, cnp.int64_t[::1] B, double[::1] R,
                   cnp.int64_t[::1] par, cnp.int64_t[::1] ms) noexcept nogil:
    cdef Py_ssize_t i, j, c, k = 0
    for i in range(width):
        for j in range(bcap + 1):
            c = i * (bcap + 1) + j
            if gc[c] >= 0:
                T[k] = i + t_lo
                B[k] = j
                R[k] = gr[c]
                par[k] = cpar[gc[c]]
                ms[k] = cm[gc[c]]
                k += 1
