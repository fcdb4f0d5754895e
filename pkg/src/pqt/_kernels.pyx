# cython: language_level=3
"""Compiled hot loops. Semantics mirror ``pqt._fallback`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

ctypedef cnp.float32_t f32
ctypedef cnp.float64_t f64
ctypedef cnp.int64_t i64
ctypedef cnp.int32_t i32
ctypedef cnp.uint8_t u8
ctypedef cnp.uint16_t u16


def nearest(X, C):
    cdef const f32[:, ::1] xv = np.ascontiguousarray(X, dtype=np.float32)
    cdef const f64[:, ::1] cv = np.ascontiguousarray(C, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], m = xv.shape[1], k = cv.shape[0]
    labels = np.zeros(n, dtype=np.int64)
    dists = np.full(n, np.inf)
    cdef i64[::1] lv = labels
    cdef f64[::1] dv = dists
    cdef Py_ssize_t r, c, d
    cdef f64 acc, diff, best
    cdef i64 arg
    with nogil:
        for r in range(n):
            best = INFINITY
            arg = 0
            for c in range(k):
                acc = 0.0
                for d in range(m):
                    diff = <f64>xv[r, d] - cv[c, d]
                    acc = acc + diff * diff
                if acc < best:
                    best = acc
                    arg = c
            lv[r] = arg
            dv[r] = best
    return labels, dists


def sq_dists(X, rows, y):
    cdef const f32[:, ::1] xv = np.ascontiguousarray(X, dtype=np.float32)
    cdef const i64[::1] rv = np.ascontiguousarray(rows, dtype=np.int64)
    cdef const f32[::1] yv = np.ascontiguousarray(y, dtype=np.float32)
    cdef Py_ssize_t nr = rv.shape[0], m = xv.shape[1]
    out = np.zeros(nr)
    cdef f64[::1] ov = out
    cdef Py_ssize_t r, d
    cdef i64 row
    cdef f64 acc, diff
    with nogil:
        for r in range(nr):
            row = rv[r]
            acc = 0.0
            for d in range(m):
                diff = <f64>xv[row, d] - <f64>yv[d]
                acc = acc + diff * diff
            ov[r] = acc
    return out


def encode_lines(X, fine):
    cdef const f32[:, ::1] xv = np.ascontiguousarray(X, dtype=np.float32)
    cdef const f64[:, :, ::1] cv = np.ascontiguousarray(fine, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t p_line = cv.shape[0], k1 = cv.shape[1], mf = cv.shape[2]
    lam_out = np.zeros((n, p_line))
    pi_out = np.zeros((n, p_line), dtype=np.int32)
    pj_out = np.zeros((n, p_line), dtype=np.int32)
    res_out = np.zeros((n, p_line))
    cdef f64[:, ::1] lo = lam_out
    cdef i32[:, ::1] io = pi_out
    cdef i32[:, ::1] jo = pj_out
    cdef f64[:, ::1] ro = res_out

    # segment directions and squared lengths, lexicographic (i, j) order
    cdef Py_ssize_t npairs = k1 * (k1 - 1) // 2
    edir_arr = np.zeros((p_line, max(npairs, 1), mf))
    elen_arr = np.zeros((p_line, max(npairs, 1)))
    pidx_arr = np.zeros((max(npairs, 1), 2), dtype=np.int32)
    cdef f64[:, :, ::1] edir = edir_arr
    cdef f64[:, ::1] elen = elen_arr
    cdef i32[:, ::1] pidx = pidx_arr
    dx_arr = np.zeros((k1, mf))
    cdef f64[:, ::1] dx = dx_arr

    cdef Py_ssize_t f, i, j, q, d, r, base
    cdef f64 ee, v, t, lam, r2, rr, best, best_lam
    cdef i32 best_i, best_j, j_fallback = 1 if k1 > 1 else 0

    with nogil:
        q = 0
        for i in range(k1):
            for j in range(i + 1, k1):
                pidx[q, 0] = <i32>i
                pidx[q, 1] = <i32>j
                q += 1
        for f in range(p_line):
            for q in range(npairs):
                i = pidx[q, 0]
                j = pidx[q, 1]
                ee = 0.0
                for d in range(mf):
                    v = cv[f, j, d] - cv[f, i, d]
                    edir[f, q, d] = v
                    ee = ee + v * v
                elen[f, q] = ee

        for r in range(n):
            for f in range(p_line):
                base = f * mf
                for i in range(k1):
                    for d in range(mf):
                        dx[i, d] = <f64>xv[r, base + d] - cv[f, i, d]
                best = INFINITY
                best_i = 0
                best_j = j_fallback
                best_lam = 0.0
                for q in range(npairs):
                    ee = elen[f, q]
                    if ee == 0.0:
                        continue
                    i = pidx[q, 0]
                    t = 0.0
                    for d in range(mf):
                        t = t + dx[i, d] * edir[f, q, d]
                    lam = t / ee
                    if lam < 0.0:
                        lam = 0.0
                    elif lam > 1.0:
                        lam = 1.0
                    r2 = 0.0
                    if lam == 1.0:
                        # residual against c_j directly so endpoint ties are exact
                        j = pidx[q, 1]
                        for d in range(mf):
                            r2 = r2 + dx[j, d] * dx[j, d]
                    else:
                        for d in range(mf):
                            rr = dx[i, d] - lam * edir[f, q, d]
                            r2 = r2 + rr * rr
                    if r2 < best:
                        best = r2
                        best_i = pidx[q, 0]
                        best_j = pidx[q, 1]
                        best_lam = lam
                if best == INFINITY:
                    r2 = 0.0
                    for d in range(mf):
                        r2 = r2 + dx[0, d] * dx[0, d]
                    best = r2
                lo[r, f] = best_lam
                io[r, f] = best_i
                jo[r, f] = best_j
                ro[r, f] = best
    return lam_out, pi_out, pj_out, res_out


def line_distances(lam, pi, pj, A, table):
    cdef const f64[:, ::1] lv = np.ascontiguousarray(lam, dtype=np.float64)
    cdef const i32[:, ::1] iv = np.ascontiguousarray(pi, dtype=np.int32)
    cdef const i32[:, ::1] jv = np.ascontiguousarray(pj, dtype=np.int32)
    cdef const f64[:, ::1] av = np.ascontiguousarray(A, dtype=np.float64)
    cdef const f64[:, :, ::1] tv = np.ascontiguousarray(table, dtype=np.float64)
    cdef Py_ssize_t c = lv.shape[0], p_line = lv.shape[1]
    out = np.zeros(c)
    cdef f64[::1] ov = out
    cdef Py_ssize_t r, f
    cdef i32 i, j
    cdef f64 acc, l, b2, a2, c2
    with nogil:
        for r in range(c):
            acc = 0.0
            for f in range(p_line):
                l = lv[r, f]
                i = iv[r, f]
                j = jv[r, f]
                b2 = av[f, i]
                a2 = av[f, j]
                c2 = tv[f, i, j]
                acc = acc + ((b2 + (l * l) * c2) + l * ((a2 - b2) - c2))
            ov[r] = acc
    return out


def line_distances_codes(cand, lam_q, pair_id, pair_i, pair_j, A, table):
    cdef const i64[::1] cv = np.ascontiguousarray(cand, dtype=np.int64)
    cdef const u8[:, ::1] qv = lam_q
    cdef const u16[:, ::1] pv = pair_id
    cdef const i32[::1] piv = np.ascontiguousarray(pair_i, dtype=np.int32)
    cdef const i32[::1] pjv = np.ascontiguousarray(pair_j, dtype=np.int32)
    cdef const f64[:, ::1] av = A
    cdef const f64[:, :, ::1] tv = table
    cdef Py_ssize_t c = cv.shape[0], p_line = qv.shape[1]
    out = np.zeros(c)
    cdef f64[::1] ov = out
    cdef Py_ssize_t r, f
    cdef i64 row
    cdef i32 i, j
    cdef u16 pid
    cdef f64 acc, l, b2, a2, c2
    with nogil:
        for r in range(c):
            row = cv[r]
            acc = 0.0
            for f in range(p_line):
                l = <f64>qv[row, f] / 255.0
                pid = pv[row, f]
                i = piv[pid]
                j = pjv[pid]
                b2 = av[f, i]
                a2 = av[f, j]
                c2 = tv[f, i, j]
                acc = acc + ((b2 + (l * l) * c2) + l * ((a2 - b2) - c2))
            ov[r] = acc
    return out


def scatter_ids(slots, offsets):
    cdef const i64[::1] sv = np.ascontiguousarray(slots, dtype=np.int64)
    cursor_arr = np.array(offsets[:-1], dtype=np.int64, copy=True)
    cdef i64[::1] cur = cursor_arr
    cdef Py_ssize_t n = sv.shape[0], r
    ids = np.empty(n, dtype=np.int64)
    cdef i64[::1] iv = ids
    cdef i64 s
    with nogil:
        for r in range(n):
            s = sv[r]
            iv[cur[s]] = r
            cur[s] += 1
    return ids


def gather(slots, offsets, ids, Py_ssize_t budget):
    cdef const i64[::1] sv = np.ascontiguousarray(slots, dtype=np.int64)
    cdef const i64[::1] ov = offsets
    cdef const i64[::1] iv = ids
    out = np.empty(budget, dtype=np.int64)
    cdef i64[::1] outv = out
    cdef Py_ssize_t ns = sv.shape[0], q, pos = 0, scanned = 0, nonempty = 0
    cdef i64 s, start, end, e
    with nogil:
        for q in range(ns):
            if pos >= budget:
                break
            scanned += 1
            s = sv[q]
            start = ov[s]
            end = ov[s + 1]
            if start == end:
                continue
            nonempty += 1
            if end - start > budget - pos:
                end = start + (budget - pos)
            for e in range(start, end):
                outv[pos] = iv[e]
                pos += 1
    return out[:pos], scanned, nonempty
