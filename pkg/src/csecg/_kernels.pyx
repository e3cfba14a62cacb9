# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Semantics are defined by ``_kernels_py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def decode_212(const unsigned char[:] buf, Py_ssize_t total):
    cdef Py_ssize_t npairs = (total + 1) // 2
    cdef Py_ssize_t nbuf = buf.shape[0]
    cdef cnp.ndarray[cnp.int16_t, ndim=1] out = np.empty(2 * npairs, dtype=np.int16)
    cdef Py_ssize_t i, j
    cdef int b0, b1, b2, s0, s1
    for i in range(npairs):
        j = 3 * i
        b0 = buf[j]
        b1 = buf[j + 1]
        b2 = buf[j + 2] if j + 2 < nbuf else 0
        s0 = ((b1 & 0x0F) << 8) | b0
        s1 = ((b1 & 0xF0) << 4) | b2
        if s0 >= 2048:
            s0 -= 4096
        if s1 >= 2048:
            s1 -= 4096
        out[2 * i] = s0
        out[2 * i + 1] = s1
    return out[:total]


def _block_sum_i64(const cnp.int64_t[:] x, Py_ssize_t d):
    cdef Py_ssize_t m = x.shape[0] // d
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(m, dtype=np.int64)
    cdef Py_ssize_t i, k
    cdef cnp.int64_t acc
    for i in range(m):
        acc = x[i * d]
        for k in range(1, d):
            acc += x[i * d + k]
        out[i] = acc
    return out


def _block_sum_f64(const double[:] x, Py_ssize_t d):
    cdef Py_ssize_t m = x.shape[0] // d
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(m, dtype=np.float64)
    cdef Py_ssize_t i, k
    cdef double acc
    for i in range(m):
        acc = x[i * d]
        for k in range(1, d):
            acc += x[i * d + k]
        out[i] = acc
    return out


def block_sum(x, Py_ssize_t d):
    x = np.ascontiguousarray(x)
    if x.dtype == np.int64:
        return _block_sum_i64(x, d)
    return _block_sum_f64(x, d)


cdef inline double _window_max(const double[:] a, Py_ssize_t p, Py_ssize_t win) nogil:
    cdef Py_ssize_t lo = p - win
    cdef Py_ssize_t i
    if lo < 0:
        lo = 0
    cdef double m = a[lo]
    for i in range(lo + 1, p + 1):
        if a[i] > m:
            m = a[i]
    return m


def pick_qrs(const double[:] env, const double[:] slope, const cnp.int64_t[:] cand,
             Py_ssize_t refractory, Py_ssize_t twave, Py_ssize_t slope_win,
             double spki, double npki, double c_signal, double c_noise,
             double thr_frac, bint searchback, double sb_factor, double sb_coef):
    cdef Py_ssize_t k = cand.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] qrs = np.empty(k, dtype=np.int64)
    cdef Py_ssize_t nq = 0
    cdef cnp.int64_t rr[8]
    cdef Py_ssize_t nrr = 0
    cdef Py_ssize_t r
    cdef long long rr_total
    cdef double rr_avg
    cdef Py_ssize_t last = -1
    cdef double last_slope = 0.0
    cdef Py_ssize_t sb_start = 0, sb_start_next = 0
    cdef double thr = npki + thr_frac * (spki - npki)
    cdef Py_ssize_t ci, cj, p, q, best
    cdef double v, bestv, s
    for ci in range(k):
        p = cand[ci]
        if searchback and last >= 0 and nrr > 0:
            rr_total = 0
            for r in range(nrr):
                rr_total += rr[r]
            rr_avg = <double>rr_total / nrr
            if p - last > sb_factor * rr_avg:
                best = -1
                bestv = 0.0
                for cj in range(sb_start, ci):
                    q = cand[cj]
                    if q - last < refractory:
                        continue
                    v = env[q]
                    if v > 0.5 * thr and v > bestv:
                        best = q
                        bestv = v
                        sb_start_next = cj + 1
                if best >= 0:
                    spki = sb_coef * bestv + (1.0 - sb_coef) * spki
                    nrr = _push_rr(rr, nrr, best - last)
                    last_slope = _window_max(slope, best, slope_win)
                    last = best
                    qrs[nq] = best
                    nq += 1
                    sb_start = sb_start_next
                    thr = npki + thr_frac * (spki - npki)
        v = env[p]
        if last >= 0 and p - last < refractory:
            continue
        if v > thr:
            s = _window_max(slope, p, slope_win)
            if last >= 0 and p - last < twave and s < 0.5 * last_slope:
                npki = c_noise * v + (1.0 - c_noise) * npki
            else:
                spki = c_signal * v + (1.0 - c_signal) * spki
                if last >= 0:
                    nrr = _push_rr(rr, nrr, p - last)
                last = p
                last_slope = s
                qrs[nq] = p
                nq += 1
                sb_start = ci + 1
        else:
            npki = c_noise * v + (1.0 - c_noise) * npki
        thr = npki + thr_frac * (spki - npki)
    return qrs[:nq].copy()


cdef inline Py_ssize_t _push_rr(cnp.int64_t* rr, Py_ssize_t nrr, cnp.int64_t value):
    cdef Py_ssize_t r
    if nrr == 8:
        for r in range(7):
            rr[r] = rr[r + 1]
        rr[7] = value
        return 8
    rr[nrr] = value
    return nrr + 1
