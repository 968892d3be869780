"""Pure-numpy implementations of the numeric kernels.

Mirrors the compiled extension ``semloop._kernels``; ``semloop._backend``
selects one of the two at import time.  Both backends implement the same
algorithms so results agree to floating-point noise (the assignment solver
is step-for-step identical and agrees bitwise).
"""

import numpy as np

BACKEND_NAME = "python"


def l1_score(ids_a, wa, ids_b, wb):
    """L1 similarity of two sparse non-negative vectors.

    ``ids_*`` are sorted unique int64 word ids, ``wa``/``wb`` the matching
    weights.  Returns ``1 - 0.5 * || a/|a| - b/|b| ||_1``.  Norms must be
    positive (checked by the caller).
    """
    na = float(wa.sum())
    nb = float(wb.sum())
    common, ia, ib = np.intersect1d(ids_a, ids_b, assume_unique=True, return_indices=True)
    an = wa / na
    bn = wb / nb
    acc = float(np.abs(an[ia] - bn[ib]).sum())
    acc += float(an.sum() - an[ia].sum())
    acc += float(bn.sum() - bn[ib].sum())
    s = 1.0 - 0.5 * acc
    if s < 0.0:
        s = 0.0
    elif s > 1.0:
        s = 1.0
    return s


def l1_scores_many(ids_q, wq, ids_cat, w_cat, offsets):
    """L1 similarity of one query against a concatenated sparse database.

    ``offsets`` has length n+1; row k occupies ``ids_cat[offsets[k]:offsets[k+1]]``.
    Rows with zero norm score 0.
    """
    n = len(offsets) - 1
    out = np.zeros(n, dtype=np.float64)
    for k in range(n):
        lo, hi = offsets[k], offsets[k + 1]
        if hi > lo and w_cat[lo:hi].sum() > 0.0:
            out[k] = l1_score(ids_q, wq, ids_cat[lo:hi], w_cat[lo:hi])
    return out


def horn_alignment(src, dst):
    """Closed-form similarity alignment of two 3D point sets.

    Returns ``(s, R, t)`` minimizing ``sum ||dst_i - (s R src_i + t)||^2``
    via the quaternion eigenvalue formulation with the symmetric scale
    estimate.  Degeneracy checks live in the caller.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    p_mean = src.mean(axis=0)
    q_mean = dst.mean(axis=0)
    p = src - p_mean
    q = dst - q_mean

    s_mat = p.T @ q  # S[a,b] = sum_i p_i[a] q_i[b]
    sxx, sxy, sxz = s_mat[0]
    syx, syy, syz = s_mat[1]
    szx, szy, szz = s_mat[2]
    n_mat = np.array(
        [
            [sxx + syy + szz, syz - szy, szx - sxz, sxy - syx],
            [syz - szy, sxx - syy - szz, sxy + syx, szx + sxz],
            [szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy],
            [sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz],
        ]
    )
    vals, vecs = np.linalg.eigh(n_mat)
    quat = vecs[:, int(np.argmax(vals))]
    w, x, y, z = quat
    rot = np.array(
        [
            [w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (y * x + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x)],
            [2 * (z * x - w * y), 2 * (z * y + w * x), w * w - x * x - y * y + z * z],
        ]
    )

    sp = float((p * p).sum())
    sq = float((q * q).sum())
    scale = float(np.sqrt(sq / sp))
    t = q_mean - scale * (rot @ p_mean)
    return scale, rot, t


def solve_assignment(scores):
    """Deterministic max-total-score assignment on a rectangular matrix.

    Classic shortest-augmenting-path (Jonker-Volgenant style) solver on the
    zero-padded square cost matrix ``-scores``.  Returns an int64 array
    ``row_to_col`` of length ``scores.shape[0]`` with -1 for rows matched to
    a padding column.
    """
    scores = np.asarray(scores, dtype=np.float64)
    rows, cols = scores.shape
    n = max(rows, cols)
    cost = np.zeros((n, n), dtype=np.float64)
    cost[:rows, :cols] = -scores

    inf = np.inf
    u = np.zeros(n, dtype=np.float64)
    v = np.zeros(n + 1, dtype=np.float64)  # index n = virtual column
    match_row = np.full(n + 1, -1, dtype=np.int64)  # col -> row

    for i in range(n):
        match_row[n] = i
        j0 = n
        minv = np.full(n, inf, dtype=np.float64)
        way = np.full(n, n, dtype=np.int64)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match_row[j0]
            cur = cost[i0] - u[i0] - v[:n]
            upd = ~used[:n] & (cur < minv)
            minv[upd] = cur[upd]
            way[upd] = j0
            masked = np.where(used[:n], inf, minv)
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            used_cols = np.flatnonzero(used)
            u[match_row[used_cols]] += delta
            v[used_cols] -= delta
            minv[~used[:n]] -= delta
            j0 = j1
            if match_row[j0] == -1:
                break
        while j0 != n:
            j1 = way[j0]
            match_row[j0] = match_row[j1]
            j0 = j1

    row_to_col = np.full(rows, -1, dtype=np.int64)
    for j in range(cols):
        i = match_row[j]
        if 0 <= i < rows:
            row_to_col[i] = j
    return row_to_col
