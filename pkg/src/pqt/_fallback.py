"""Pure numpy implementations of the hot kernels.

Every function here has a twin in ``_kernels.pyx`` with the same signature.
Floating point work is done in float64 and accumulated in the same order as
the compiled loops (sequentially over coordinates / parts), so both backends
return bit-identical results.
"""

import numpy as np

_CHUNK = 8192


def nearest(X, C):
    """Nearest centroid for every row of ``X``.

    Args:
        X: (n, m) float32 points.
        C: (k, m) float64 centroids.

    Returns:
        ``(labels, dists)``: int64 indices (ties go to the lowest index) and
        float64 squared distances.
    """
    X = np.ascontiguousarray(X, dtype=np.float32)
    C = np.ascontiguousarray(C, dtype=np.float64)
    n, m = X.shape
    k = C.shape[0]
    labels = np.zeros(n, dtype=np.int64)
    dists = np.full(n, np.inf)
    for lo in range(0, n, _CHUNK):
        xb = X[lo:lo + _CHUNK].astype(np.float64)
        acc = np.zeros((xb.shape[0], k))
        for d in range(m):
            diff = xb[:, d:d + 1] - C[None, :, d]
            acc = acc + diff * diff
        # argmin returns the first minimum
        lab = np.argmin(acc, axis=1)
        labels[lo:lo + len(lab)] = lab
        dists[lo:lo + len(lab)] = acc[np.arange(len(lab)), lab]
    return labels, dists


def sq_dists(X, rows, y):
    """Squared Euclidean distances from ``y`` to ``X[rows]`` (float64)."""
    X = np.asarray(X)
    y = np.asarray(y, dtype=np.float32).astype(np.float64)
    rows = np.asarray(rows, dtype=np.int64)
    acc = np.zeros(len(rows))
    for lo in range(0, len(rows), _CHUNK * 4):
        sub = X[rows[lo:lo + _CHUNK * 4]].astype(np.float64)
        a = np.zeros(sub.shape[0])
        for d in range(sub.shape[1]):
            diff = sub[:, d] - y[d]
            a = a + diff * diff
        acc[lo:lo + len(a)] = a
    return acc


def encode_lines(X, fine):
    """Project every fine part of every row onto its best centroid segment.

    Args:
        X: (n, D) float32 vectors.
        fine: (p_line, k1, D // p_line) float64 fine centroid slices.

    Returns:
        ``(lam, pi, pj, resid)`` each shaped (n, p_line): the unquantized
        projection coefficient, the segment endpoints (pi < pj), and the
        squared residual of the projection.
    """
    X = np.ascontiguousarray(X, dtype=np.float32)
    fine = np.ascontiguousarray(fine, dtype=np.float64)
    n = X.shape[0]
    p_line, k1, mf = fine.shape
    lam_out = np.zeros((n, p_line))
    pi_out = np.zeros((n, p_line), dtype=np.int32)
    pj_out = np.zeros((n, p_line), dtype=np.int32)
    res_out = np.zeros((n, p_line))
    j_fallback = 1 if k1 > 1 else 0

    for f in range(p_line):
        cent = fine[f]
        pairs = []
        for i in range(k1):
            for j in range(i + 1, k1):
                e = [float(cent[j, d] - cent[i, d]) for d in range(mf)]
                ee = 0.0
                for v in e:
                    ee += v * v
                if ee != 0.0:
                    pairs.append((i, j, e, ee))
        for lo in range(0, n, _CHUNK):
            xb = X[lo:lo + _CHUNK, f * mf:(f + 1) * mf].astype(np.float64)
            nb = xb.shape[0]
            dx = [[xb[:, d] - cent[i, d] for d in range(mf)] for i in range(k1)]
            best = np.full(nb, np.inf)
            best_i = np.zeros(nb, dtype=np.int32)
            best_j = np.full(nb, j_fallback, dtype=np.int32)
            best_lam = np.zeros(nb)
            for i, j, e, ee in pairs:
                dxi = dx[i]
                t = np.zeros(nb)
                for d in range(mf):
                    t = t + dxi[d] * e[d]
                lam = t / ee
                lam = np.minimum(np.maximum(lam, 0.0), 1.0)
                r2 = np.zeros(nb)
                dxj = dx[j]
                at_j = lam == 1.0
                for d in range(mf):
                    # residual against c_j directly so endpoint ties are exact
                    r = np.where(at_j, dxj[d], dxi[d] - lam * e[d])
                    r2 = r2 + r * r
                better = r2 < best
                best = np.where(better, r2, best)
                best_i[better] = i
                best_j[better] = j
                best_lam = np.where(better, lam, best_lam)
            if not pairs:
                r2 = np.zeros(nb)
                for d in range(mf):
                    r2 = r2 + dx[0][d] * dx[0][d]
                best = r2
            lam_out[lo:lo + nb, f] = best_lam
            pi_out[lo:lo + nb, f] = best_i
            pj_out[lo:lo + nb, f] = best_j
            res_out[lo:lo + nb, f] = best
    return lam_out, pi_out, pj_out, res_out


def _line_terms(lam, b2, a2, c2):
    return (b2 + (lam * lam) * c2) + lam * ((a2 - b2) - c2)


def line_distances(lam, pi, pj, A, table):
    """Triangulated squared distance for explicit (lam, i, j) codes.

    Args:
        lam: (c, p_line) float64 projection coefficients.
        pi, pj: (c, p_line) int32 endpoint ids (lam=0 at ``pi``).
        A: (p_line, k1) float64 query-to-centroid squared distances.
        table: (p_line, k1, k1) float64 centroid pair squared distances.
    """
    lam = np.asarray(lam, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.int64)
    pj = np.asarray(pj, dtype=np.int64)
    acc = np.zeros(lam.shape[0])
    for f in range(lam.shape[1]):
        i = pi[:, f]
        j = pj[:, f]
        acc = acc + _line_terms(lam[:, f], A[f, i], A[f, j], table[f, i, j])
    return acc


def line_distances_codes(cand, lam_q, pair_id, pair_i, pair_j, A, table):
    """Triangulated squared distance for stored line codes of ``cand`` rows."""
    cand = np.asarray(cand, dtype=np.int64)
    lq = lam_q[cand]
    pid = pair_id[cand].astype(np.int64)
    acc = np.zeros(len(cand))
    for f in range(lq.shape[1]):
        lam = lq[:, f].astype(np.float64) / 255.0
        i = pair_i[pid[:, f]]
        j = pair_j[pid[:, f]]
        acc = acc + _line_terms(lam, A[f, i], A[f, j], table[f, i, j])
    return acc


def scatter_ids(slots, offsets):
    """Place ids into slot order; ids inside a slot stay ascending."""
    slots = np.asarray(slots, dtype=np.int64)
    return np.argsort(slots, kind="stable").astype(np.int64)


def gather(slots, offsets, ids, budget):
    """Concatenate inverted-list entries of ``slots`` until ``budget`` ids.

    Returns:
        ``(candidates, n_scanned, n_nonempty)`` where ``n_scanned`` counts the
        slots read (including empty ones) before the budget was met.
    """
    slots = np.asarray(slots, dtype=np.int64)
    if budget <= 0:
        return np.zeros(0, dtype=np.int64), 0, 0
    starts = offsets[slots]
    lens = offsets[slots + 1] - starts
    cum = np.cumsum(lens)
    hit = np.flatnonzero(cum >= budget)
    n_scanned = int(hit[0]) + 1 if len(hit) else len(slots)
    starts = starts[:n_scanned]
    lens = lens[:n_scanned].copy()
    total = int(lens.sum())
    if total > budget:
        lens[-1] -= total - budget
        total = budget
    n_nonempty = int(np.count_nonzero(lens))
    if total == 0:
        return np.zeros(0, dtype=np.int64), n_scanned, n_nonempty
    before = np.cumsum(lens) - lens
    idx = np.repeat(starts - before, lens) + np.arange(total)
    return ids[idx].astype(np.int64), n_scanned, n_nonempty
