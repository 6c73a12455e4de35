# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: row encoding and batch class scoring.

Same signatures and results as ``_kernels_py``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

FORM_NONE = 0
FORM_PRODUCT = 1
FORM_MINIMUM = 2


def encoded_dimension(gamma, int form):
    cdef cnp.int64_t[::1] g = np.ascontiguousarray(gamma, dtype=np.int64)
    cdef Py_ssize_t n = g.shape[0], j, k
    cdef Py_ssize_t dim = 0
    for j in range(n):
        dim += g[j]
    if form != 0:
        for j in range(n):
            for k in range(j + 1, n):
                dim += 2 * g[j] * g[k]
    return int(dim)


def encode_rows(X, alpha, beta, gamma, int form):
    Xa = np.asarray(X, dtype=np.float64)
    if Xa.ndim == 1:
        Xa = Xa[None, :]
    cdef double[:, ::1] x = np.ascontiguousarray(Xa)
    cdef double[::1] a = np.ascontiguousarray(alpha, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(beta, dtype=np.float64)
    cdef cnp.int64_t[::1] g = np.ascontiguousarray(gamma, dtype=np.int64)
    cdef Py_ssize_t N = x.shape[0], n = x.shape[1]
    cdef Py_ssize_t D = encoded_dimension(gamma, form)
    out_arr = np.empty((N, D), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef cnp.int64_t[::1] offset = np.zeros(n + 1, dtype=np.int64)
    cdef Py_ssize_t i, j, k, s, t, col, gj, gk
    cdef double xv, lo, hi, span, v, vs, vt
    for j in range(n):
        offset[j + 1] = offset[j] + g[j]
    for i in range(N):
        for j in range(n):
            gj = g[j]
            span = b[j] - a[j]
            xv = x[i, j]
            if xv < a[j]:
                xv = a[j]
            elif xv > b[j]:
                xv = b[j]
            for s in range(gj):
                lo = a[j] + span * s / gj
                if s == gj - 1:
                    hi = b[j]
                else:
                    hi = a[j] + span * (s + 1) / gj
                v = (xv - lo) / (hi - lo)
                if v < 0.0:
                    v = 0.0
                elif v > 1.0:
                    v = 1.0
                out[i, offset[j] + s] = v
        if form != 0:
            col = offset[n]
            for j in range(n):
                for k in range(j + 1, n):
                    gj = g[j]
                    gk = g[k]
                    for s in range(gj):
                        vs = out[i, offset[j] + s]
                        for t in range(gk):
                            vt = out[i, offset[k] + t]
                            if form == 1:
                                v = vs * vt
                            else:
                                v = vs if vs < vt else vt
                            out[i, col + s * gk + t] = v
                            out[i, col + gj * gk + s * gk + t] = -v
                    col += 2 * gj * gk
    return out_arr


cdef inline Py_ssize_t _left(double[::1] arr, Py_ssize_t lo, Py_ssize_t hi, double x) nogil:
    # first index in [lo, hi) with arr[idx] >= x
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if arr[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline Py_ssize_t _right(double[::1] arr, Py_ssize_t lo, Py_ssize_t hi, double x) nogil:
    # first index in [lo, hi) with arr[idx] > x
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if arr[mid] <= x:
            lo = mid + 1
        else:
            hi = mid
    return lo


def _class_sorted(ref_u, ref_cls, int q):
    """References grouped by class, each group sorted by value; returns values, start offsets, order."""
    u = np.asarray(ref_u, dtype=np.float64)
    c = np.asarray(ref_cls, dtype=np.int64)
    order = np.lexsort((u, c))
    starts = np.searchsorted(c[order], np.arange(1, q + 2))
    return np.ascontiguousarray(u[order]), np.ascontiguousarray(starts, dtype=np.int64), order


def supporter_mass(ref_u, ref_cls, weights, int q, queries):
    vals_arr, starts_arr, order = _class_sorted(ref_u, ref_cls, q)
    w_sorted = np.asarray(weights, dtype=np.float64)[order]
    cdef double[::1] vals = vals_arr
    cdef cnp.int64_t[::1] starts = starts_arr
    cdef double[::1] csum = np.concatenate(([0.0], np.cumsum(w_sorted)))
    cdef double[::1] qs = np.ascontiguousarray(queries, dtype=np.float64)
    cdef Py_ssize_t nq = qs.shape[0], i, c, k, lo, hi, s0, s1
    out_arr = np.zeros((nq, q), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] below = np.zeros(q, dtype=np.float64)
    cdef double[::1] above = np.zeros(q, dtype=np.float64)
    cdef double acc
    with nogil:
        for i in range(nq):
            for c in range(q):
                s0 = starts[c]
                s1 = starts[c + 1]
                lo = _left(vals, s0, s1, qs[i])
                hi = _right(vals, s0, s1, qs[i])
                below[c] = csum[lo] - csum[s0]
                above[c] = csum[s1] - csum[hi]
            for k in range(q):
                acc = 0.0
                for c in range(k):
                    acc = acc + below[c]
                for c in range(k + 1, q):
                    acc = acc + above[c]
                out[i, k] = acc
    return out_arr


def m3_scores(ref_u, ref_cls, int q, queries):
    vals_arr, starts_arr, _ = _class_sorted(ref_u, ref_cls, q)
    cdef double[::1] vals = vals_arr
    cdef cnp.int64_t[::1] starts = starts_arr
    cdef double[::1] allv = np.sort(np.asarray(ref_u, dtype=np.float64))
    cdef double[::1] qs = np.ascontiguousarray(queries, dtype=np.float64)
    cdef Py_ssize_t nq = qs.shape[0], N = allv.shape[0]
    cdef Py_ssize_t i, c, r, s0, s1, k_le_ua, all_le_ua, num, den
    cdef double ua, u, total
    out_arr = np.zeros((nq, q), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(nq):
            ua = qs[i]
            all_le_ua = _right(allv, 0, N, ua)
            for c in range(q):
                s0 = starts[c]
                s1 = starts[c + 1]
                if s1 == s0:
                    continue
                k_le_ua = _right(vals, s0, s1, ua)
                total = 0.0
                for r in range(s0, s1):
                    u = vals[r]
                    if u <= ua:
                        num = k_le_ua - _left(vals, s0, s1, u)
                        den = all_le_ua - _left(allv, 0, N, u)
                    else:
                        num = _right(vals, s0, s1, u) - k_le_ua
                        den = _right(allv, 0, N, u) - all_le_ua
                    total = total + (<double> num) / den
                out[i, c] = total / (s1 - s0)
    return out_arr


def m4_scores(ref_u, ref_cls, int q, queries, int K):
    cdef double[::1] u = np.ascontiguousarray(ref_u, dtype=np.float64)
    cdef cnp.int64_t[::1] cls = np.ascontiguousarray(ref_cls, dtype=np.int64)
    cdef double[::1] qs = np.ascontiguousarray(queries, dtype=np.float64)
    cdef Py_ssize_t nq = qs.shape[0], N = u.shape[0]
    cdef Py_ssize_t i, r, p, filled
    cdef double d, total
    cdef int nzero
    out_arr = np.zeros((nq, q), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] best_d = np.empty(K, dtype=np.float64)
    cdef cnp.int64_t[::1] best_i = np.empty(K, dtype=np.int64)
    with nogil:
        for i in range(nq):
            filled = 0
            # insertion into a sorted list of K; scanning in input order keeps earlier refs on ties
            for r in range(N):
                d = fabs(u[r] - qs[i])
                if filled == K and d >= best_d[K - 1]:
                    continue
                if filled < K:
                    p = filled
                    filled += 1
                else:
                    p = K - 1
                while p > 0 and best_d[p - 1] > d:
                    best_d[p] = best_d[p - 1]
                    best_i[p] = best_i[p - 1]
                    p -= 1
                best_d[p] = d
                best_i[p] = r
            nzero = 0
            for p in range(filled):
                if best_d[p] == 0.0:
                    nzero += 1
            total = 0.0
            for p in range(filled):
                if nzero > 0:
                    if best_d[p] == 0.0:
                        out[i, cls[best_i[p]] - 1] += 1.0
                        total += 1.0
                else:
                    out[i, cls[best_i[p]] - 1] += 1.0 / best_d[p]
                    total += 1.0 / best_d[p]
            for p in range(q):
                out[i, p] = out[i, p] / total
    return out_arr
