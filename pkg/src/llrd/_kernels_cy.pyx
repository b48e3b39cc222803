# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the iteration hot loops.

Semantics match :mod:`llrd._kernels_py` exactly; see that module for the
API documentation. Everything is log-space, so +inf distortion entries
and very large slopes are handled without under/overflow.
"""

import numpy as np

from libc.math cimport INFINITY, exp, fabs, log, sqrt

STATUS_OK = 0
STATUS_MAX_ITERS = 1
STATUS_SUPPORT = 2


def ba_iterate(p_in, d_in, double lam, logq0, double tol, long max_iters, debug=False):
    cdef const double[::1] p = np.ascontiguousarray(p_in, dtype=np.float64)
    cdef const double[:, ::1] d = np.ascontiguousarray(d_in, dtype=np.float64)
    cdef long n = d.shape[0]
    cdef long m = d.shape[1]
    logq_arr = np.array(logq0, dtype=np.float64)
    cdef double[::1] logq = logq_arr
    logp_arr = np.empty(n, dtype=np.float64)
    logz_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] logp = logp_arr
    cdef double[::1] logz = logz_arr
    cdef long i, j, iters
    cdef double hi, s, v, gap, obj, prev_obj
    cdef int status = STATUS_MAX_ITERS
    cdef bint reinit_used = 0
    cdef bint dbg = 1 if debug else 0
    cdef bint support_ok

    for i in range(n):
        logp[i] = log(p[i]) if p[i] > 0 else -INFINITY

    gap = INFINITY
    prev_obj = INFINITY
    iters = 0
    while iters < max_iters:
        iters += 1
        support_ok = 1
        for i in range(n):
            hi = -INFINITY
            for j in range(m):
                v = logq[j] - lam * d[i, j]
                if v > hi:
                    hi = v
            if hi == -INFINITY:
                support_ok = 0
                break
            s = 0.0
            for j in range(m):
                v = logq[j] - lam * d[i, j]
                if v != -INFINITY:
                    s += exp(v - hi)
            logz[i] = hi + log(s)
        if not support_ok:
            if reinit_used:
                status = STATUS_SUPPORT
                break
            for j in range(m):
                logq[j] = -log(<double> m)
            reinit_used = 1
            continue
        if dbg:
            obj = 0.0
            for i in range(n):
                if p[i] > 0:
                    obj -= p[i] * logz[i]
            assert obj <= prev_obj + 1e-9, "BA Lagrangian increased"
            prev_obj = obj
        gap = -INFINITY
        for j in range(m):
            hi = -INFINITY
            for i in range(n):
                v = logp[i] - lam * d[i, j] - logz[i]
                if v > hi:
                    hi = v
            if hi == -INFINITY:
                logq[j] = -INFINITY
                continue
            s = 0.0
            for i in range(n):
                v = logp[i] - lam * d[i, j] - logz[i]
                if v != -INFINITY:
                    s += exp(v - hi)
            v = hi + log(s)  # log r_j
            if v > gap:
                gap = v
            logq[j] = logq[j] + v
        if gap <= tol:
            status = STATUS_OK
            break

    # final channel and achieved point from the last marginal
    logw_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] logw = logw_arr
    for i in range(n):
        hi = -INFINITY
        for j in range(m):
            v = logq[j] - lam * d[i, j]
            if v > hi:
                hi = v
        s = 0.0
        for j in range(m):
            v = logq[j] - lam * d[i, j]
            if v != -INFINITY:
                s += exp(v - hi)
        logz[i] = hi + log(s)
        for j in range(m):
            logw[i, j] = logq[j] - lam * d[i, j] - logz[i]

    q_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] q_out = q_arr
    cdef double total = 0.0
    for j in range(m):
        s = 0.0
        for i in range(n):
            if logw[i, j] != -INFINITY:
                s += p[i] * exp(logw[i, j])
        q_out[j] = s
        total += s
    for j in range(m):
        q_out[j] = q_out[j] / total

    cdef double rate = 0.0
    cdef double dist = 0.0
    cdef double w_ij
    for i in range(n):
        if p[i] <= 0:
            continue
        for j in range(m):
            if logw[i, j] == -INFINITY:
                continue
            w_ij = exp(logw[i, j])
            if w_ij > 0:
                rate += p[i] * w_ij * (logw[i, j] - log(q_out[j]))
                dist += p[i] * w_ij * d[i, j]
    if rate < 0:
        rate = 0.0
    return logw_arr, q_arr, rate, dist, iters, gap, status


def sinkhorn_scale(logk_in, logp_in, loga0, logb0, double tol, long max_sweeps):
    cdef const double[:, ::1] logk = np.ascontiguousarray(logk_in, dtype=np.float64)
    cdef const double[::1] logp = np.ascontiguousarray(logp_in, dtype=np.float64)
    cdef long n = logk.shape[0]
    cdef long m = logk.shape[1]
    loga_arr = np.array(loga0, dtype=np.float64)
    logb_arr = np.array(logb0, dtype=np.float64)
    cdef double[::1] loga = loga_arr
    cdef double[::1] logb = logb_arr
    cdef long i, j, sweeps
    cdef double hi, s, v, dev, row_sum
    cdef int status = STATUS_MAX_ITERS

    dev = INFINITY
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        for i in range(n):
            hi = -INFINITY
            for j in range(m):
                v = logk[i, j] + logb[j]
                if v > hi:
                    hi = v
            if hi == -INFINITY:
                if logp[i] != -INFINITY:
                    status = STATUS_SUPPORT
                    break
                loga[i] = -INFINITY
                continue
            s = 0.0
            for j in range(m):
                v = logk[i, j] + logb[j]
                if v != -INFINITY:
                    s += exp(v - hi)
            loga[i] = logp[i] - (hi + log(s)) if logp[i] != -INFINITY else -INFINITY
        if status == STATUS_SUPPORT:
            break
        for j in range(m):
            hi = -INFINITY
            for i in range(n):
                v = logk[i, j] + loga[i]
                if v > hi:
                    hi = v
            if hi == -INFINITY:
                if logp[j] != -INFINITY:
                    status = STATUS_SUPPORT
                    break
                logb[j] = -INFINITY
                continue
            s = 0.0
            for i in range(n):
                v = logk[i, j] + loga[i]
                if v != -INFINITY:
                    s += exp(v - hi)
            logb[j] = logp[j] - (hi + log(s)) if logp[j] != -INFINITY else -INFINITY
        if status == STATUS_SUPPORT:
            break
        dev = 0.0
        for i in range(n):
            row_sum = 0.0
            for j in range(m):
                v = loga[i] + logk[i, j] + logb[j]
                if v != -INFINITY:
                    row_sum += exp(v)
            v = fabs(row_sum - (exp(logp[i]) if logp[i] != -INFINITY else 0.0))
            if v > dev:
                dev = v
        if dev <= tol:
            status = STATUS_OK
            break
    return loga_arr, logb_arr, sweeps, dev, status


def symnmf_run(v_in, b0, long iters):
    cdef const double[:, ::1] v = np.ascontiguousarray(v_in, dtype=np.float64)
    b_arr = np.array(b0, dtype=np.float64)
    cdef double[:, ::1] b = b_arr
    cdef long n = b.shape[0]
    cdef long r = b.shape[1]
    vb_arr = np.empty((n, r), dtype=np.float64)
    btb_arr = np.empty((r, r), dtype=np.float64)
    bbtb_arr = np.empty((n, r), dtype=np.float64)
    cdef double[:, ::1] vb = vb_arr
    cdef double[:, ::1] btb = btb_arr
    cdef double[:, ::1] bbtb = bbtb_arr
    cdef long t, i, j, k
    cdef double s, num, den, tiny, scale
    tiny = 1e-300

    for t in range(iters):
        for i in range(n):
            for k in range(r):
                s = 0.0
                for j in range(n):
                    s += v[i, j] * b[j, k]
                vb[i, k] = s
        for i in range(r):
            for k in range(r):
                s = 0.0
                for j in range(n):
                    s += b[j, i] * b[j, k]
                btb[i, k] = s
        for i in range(n):
            for k in range(r):
                s = 0.0
                for j in range(r):
                    s += b[i, j] * btb[j, k]
                bbtb[i, k] = s
        for i in range(n):
            for k in range(r):
                den = bbtb[i, k]
                if den < tiny:
                    den = tiny
                b[i, k] = b[i, k] * (0.5 + 0.5 * vb[i, k] / den)
        # closed-form rescale of the Gram magnitude
        for i in range(n):
            for k in range(r):
                s = 0.0
                for j in range(n):
                    s += v[i, j] * b[j, k]
                vb[i, k] = s
        num = 0.0
        for i in range(n):
            for k in range(r):
                num += vb[i, k] * b[i, k]
        for i in range(r):
            for k in range(r):
                s = 0.0
                for j in range(n):
                    s += b[j, i] * b[j, k]
                btb[i, k] = s
        den = 0.0
        for i in range(r):
            for k in range(r):
                den += btb[i, k] * btb[i, k]
        if den > tiny and num > 0:
            scale = sqrt(num / den)
            for i in range(n):
                for k in range(r):
                    b[i, k] = b[i, k] * scale
    return b_arr
