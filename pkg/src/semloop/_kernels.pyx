# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled numeric kernels: sparse L1 scoring, similarity alignment,
assignment solving.  Mirrors semloop._kernels_py."""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs, sqrt

cnp.import_array()

BACKEND_NAME = "compiled"


def l1_score(cnp.int64_t[::1] ids_a, double[::1] wa,
             cnp.int64_t[::1] ids_b, double[::1] wb):
    """L1 similarity of two sparse non-negative vectors (sorted unique ids)."""
    cdef Py_ssize_t na_len = ids_a.shape[0]
    cdef Py_ssize_t nb_len = ids_b.shape[0]
    cdef double na = 0.0, nb = 0.0
    cdef Py_ssize_t i, j
    for i in range(na_len):
        na += wa[i]
    for j in range(nb_len):
        nb += wb[j]
    cdef double acc = 0.0
    i = 0
    j = 0
    while i < na_len and j < nb_len:
        if ids_a[i] == ids_b[j]:
            acc += fabs(wa[i] / na - wb[j] / nb)
            i += 1
            j += 1
        elif ids_a[i] < ids_b[j]:
            acc += wa[i] / na
            i += 1
        else:
            acc += wb[j] / nb
            j += 1
    while i < na_len:
        acc += wa[i] / na
        i += 1
    while j < nb_len:
        acc += wb[j] / nb
        j += 1
    cdef double s = 1.0 - 0.5 * acc
    if s < 0.0:
        s = 0.0
    elif s > 1.0:
        s = 1.0
    return s


def l1_scores_many(cnp.int64_t[::1] ids_q, double[::1] wq,
                   cnp.int64_t[::1] ids_cat, double[::1] w_cat,
                   cnp.int64_t[::1] offsets):
    """L1 similarity of one query against a concatenated sparse database."""
    cdef Py_ssize_t n = offsets.shape[0] - 1
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] out_v = out
    cdef Py_ssize_t k, lo, hi, i, j
    cdef double nq = 0.0, nr, acc, s
    for i in range(ids_q.shape[0]):
        nq += wq[i]
    for k in range(n):
        lo = offsets[k]
        hi = offsets[k + 1]
        if hi <= lo:
            continue
        nr = 0.0
        for j in range(lo, hi):
            nr += w_cat[j]
        if nr <= 0.0:
            continue
        acc = 0.0
        i = 0
        j = lo
        while i < ids_q.shape[0] and j < hi:
            if ids_q[i] == ids_cat[j]:
                acc += fabs(wq[i] / nq - w_cat[j] / nr)
                i += 1
                j += 1
            elif ids_q[i] < ids_cat[j]:
                acc += wq[i] / nq
                i += 1
            else:
                acc += w_cat[j] / nr
                j += 1
        while i < ids_q.shape[0]:
            acc += wq[i] / nq
            i += 1
        while j < hi:
            acc += w_cat[j] / nr
            j += 1
        s = 1.0 - 0.5 * acc
        if s < 0.0:
            s = 0.0
        elif s > 1.0:
            s = 1.0
        out_v[k] = s
    return out


cdef void _jacobi_eig4(double[4][4] a, double[4] vals, double[4][4] vecs) noexcept:
    """Cyclic Jacobi eigendecomposition of a symmetric 4x4 matrix."""
    cdef int p, q, r, sweep
    cdef double off, theta, t, c, s, tau, h, g
    for p in range(4):
        for q in range(4):
            vecs[p][q] = 1.0 if p == q else 0.0
    for sweep in range(64):
        off = 0.0
        for p in range(3):
            for q in range(p + 1, 4):
                off += a[p][q] * a[p][q]
        if off < 1e-30:
            break
        for p in range(3):
            for q in range(p + 1, 4):
                if fabs(a[p][q]) < 1e-300:
                    continue
                theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q]
                if theta >= 0:
                    t = 1.0 / (theta + sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + sqrt(1.0 + theta * theta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                tau = s / (1.0 + c)
                h = t * a[p][q]
                a[p][p] -= h
                a[q][q] += h
                a[p][q] = 0.0
                a[q][p] = 0.0
                for r in range(4):
                    if r != p and r != q:
                        g = a[r][p]
                        h = a[r][q]
                        a[r][p] = g - s * (h + tau * g)
                        a[r][q] = h + s * (g - tau * h)
                        a[p][r] = a[r][p]
                        a[q][r] = a[r][q]
                for r in range(4):
                    g = vecs[r][p]
                    h = vecs[r][q]
                    vecs[r][p] = g - s * (h + tau * g)
                    vecs[r][q] = h + s * (g - tau * h)
    for p in range(4):
        vals[p] = a[p][p]


def horn_alignment(cnp.ndarray src_arr, cnp.ndarray dst_arr):
    """Closed-form similarity alignment (quaternion form, symmetric scale)."""
    cdef double[:, ::1] src = np.ascontiguousarray(src_arr, dtype=np.float64)
    cdef double[:, ::1] dst = np.ascontiguousarray(dst_arr, dtype=np.float64)
    cdef Py_ssize_t n = src.shape[0], i
    cdef int a, b
    cdef double[3] pm, qm
    for a in range(3):
        pm[a] = 0.0
        qm[a] = 0.0
    for i in range(n):
        for a in range(3):
            pm[a] += src[i, a]
            qm[a] += dst[i, a]
    for a in range(3):
        pm[a] /= n
        qm[a] /= n

    cdef double[3][3] s_mat
    cdef double sp = 0.0, sq = 0.0
    cdef double pa, qb
    for a in range(3):
        for b in range(3):
            s_mat[a][b] = 0.0
    for i in range(n):
        for a in range(3):
            pa = src[i, a] - pm[a]
            sp += pa * pa
            qb = dst[i, a] - qm[a]
            sq += qb * qb
        for a in range(3):
            pa = src[i, a] - pm[a]
            for b in range(3):
                s_mat[a][b] += pa * (dst[i, b] - qm[b])

    cdef double[4][4] n_mat
    n_mat[0][0] = s_mat[0][0] + s_mat[1][1] + s_mat[2][2]
    n_mat[0][1] = s_mat[1][2] - s_mat[2][1]
    n_mat[0][2] = s_mat[2][0] - s_mat[0][2]
    n_mat[0][3] = s_mat[0][1] - s_mat[1][0]
    n_mat[1][1] = s_mat[0][0] - s_mat[1][1] - s_mat[2][2]
    n_mat[1][2] = s_mat[0][1] + s_mat[1][0]
    n_mat[1][3] = s_mat[2][0] + s_mat[0][2]
    n_mat[2][2] = -s_mat[0][0] + s_mat[1][1] - s_mat[2][2]
    n_mat[2][3] = s_mat[1][2] + s_mat[2][1]
    n_mat[3][3] = -s_mat[0][0] - s_mat[1][1] + s_mat[2][2]
    n_mat[1][0] = n_mat[0][1]
    n_mat[2][0] = n_mat[0][2]
    n_mat[2][1] = n_mat[1][2]
    n_mat[3][0] = n_mat[0][3]
    n_mat[3][1] = n_mat[1][3]
    n_mat[3][2] = n_mat[2][3]

    cdef double[4] vals
    cdef double[4][4] vecs
    _jacobi_eig4(n_mat, vals, vecs)
    cdef int best = 0
    for a in range(1, 4):
        if vals[a] > vals[best]:
            best = a
    cdef double w = vecs[0][best], x = vecs[1][best], y = vecs[2][best], z = vecs[3][best]
    cdef double qn = sqrt(w * w + x * x + y * y + z * z)
    w /= qn
    x /= qn
    y /= qn
    z /= qn

    rot = np.empty((3, 3), dtype=np.float64)
    cdef double[:, ::1] r = rot
    r[0, 0] = w * w + x * x - y * y - z * z
    r[0, 1] = 2 * (x * y - w * z)
    r[0, 2] = 2 * (x * z + w * y)
    r[1, 0] = 2 * (y * x + w * z)
    r[1, 1] = w * w - x * x + y * y - z * z
    r[1, 2] = 2 * (y * z - w * x)
    r[2, 0] = 2 * (z * x - w * y)
    r[2, 1] = 2 * (z * y + w * x)
    r[2, 2] = w * w - x * x - y * y + z * z

    cdef double scale = sqrt(sq / sp)
    t = np.empty(3, dtype=np.float64)
    cdef double[::1] tv = t
    for a in range(3):
        tv[a] = qm[a] - scale * (r[a, 0] * pm[0] + r[a, 1] * pm[1] + r[a, 2] * pm[2])
    return scale, rot, t


def solve_assignment(cnp.ndarray scores_arr):
    """Deterministic max-total-score assignment (same algorithm as the
    python backend, step-for-step, so the two agree bitwise)."""
    scores_in = np.ascontiguousarray(scores_arr, dtype=np.float64)
    cdef Py_ssize_t rows = scores_in.shape[0]
    cdef Py_ssize_t cols = scores_in.shape[1]
    cdef Py_ssize_t n = rows if rows > cols else cols
    cost_arr = np.zeros((n, n), dtype=np.float64)
    cost_arr[:rows, :cols] = -scores_in
    cdef double[:, ::1] cost = cost_arr

    u_arr = np.zeros(n, dtype=np.float64)
    v_arr = np.zeros(n + 1, dtype=np.float64)
    match_arr = np.full(n + 1, -1, dtype=np.int64)
    minv_arr = np.empty(n, dtype=np.float64)
    way_arr = np.empty(n, dtype=np.int64)
    used_arr = np.empty(n + 1, dtype=np.uint8)
    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef cnp.int64_t[::1] match_row = match_arr
    cdef double[::1] minv = minv_arr
    cdef cnp.int64_t[::1] way = way_arr
    cdef cnp.uint8_t[::1] used = used_arr

    cdef Py_ssize_t i, j, i0, j0, j1
    cdef double cur, delta
    for i in range(n):
        match_row[n] = i
        j0 = n
        for j in range(n):
            minv[j] = INFINITY
            way[j] = n
            used[j] = 0
        used[n] = 0
        while True:
            used[j0] = 1
            i0 = match_row[j0]
            delta = INFINITY
            j1 = -1
            for j in range(n):
                if not used[j]:
                    cur = cost[i0, j] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match_row[j]] += delta
                    v[j] -= delta
                elif j < n:
                    minv[j] -= delta
            j0 = j1
            if match_row[j0] == -1:
                break
        while j0 != n:
            j1 = way[j0]
            match_row[j0] = match_row[j1]
            j0 = j1

    out = np.full(rows, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] out_v = out
    for j in range(cols):
        i = match_row[j]
        if 0 <= i < rows:
            out_v[i] = j
    return out
