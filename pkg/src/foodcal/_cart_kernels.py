"""Hot kernel for CART split search.

Given a node's rows, finds the (feature, threshold) minimizing the summed
left/right squared error. Candidate thresholds sit at midpoints between
consecutive distinct sorted values; ties resolve to the lowest feature
index, then the lowest threshold. Scores within a small relative tolerance
are treated as ties, so exact-arithmetic ties cannot be reordered by
float rounding (this keeps tree structure stable under, e.g., target
translation). Both backends use a stable sort and the same operation
order, so they choose bit-identical splits.
"""

import numpy as np

from foodcal import backend

# relative slack under which two candidate scores count as tied
_TIE_REL = 1e-10


def _best_split_loops(X, y, feat_ids, min_leaf):
    """Returns (feature, threshold, split_sse, parent_sse); feature is -1
    when no candidate satisfies the leaf-size constraint."""
    n = X.shape[0]
    best_feat = -1
    best_thr = 0.0
    best_score = np.inf
    parent_sse = np.inf
    tol = np.inf
    for fi in range(feat_ids.shape[0]):
        f = feat_ids[fi]
        col = X[:, f].copy()
        order = np.argsort(col, kind="mergesort")
        ys = y[order]
        cum = np.cumsum(ys)
        cumsq = np.cumsum(ys * ys)
        total = cum[n - 1]
        total_sq = cumsq[n - 1]
        parent_sse = total_sq - total * total / n
        tol = _TIE_REL * (1.0 + abs(parent_sse))
        # pass 1: minimum score over valid candidates
        min_score = np.inf
        for i in range(n - 1):
            lo = col[order[i]]
            hi = col[order[i + 1]]
            if hi <= lo:
                continue
            nl = i + 1
            nr = n - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            sl = cum[i]
            sql = cumsq[i]
            sse_l = sql - sl * sl / nl
            sr = total - sl
            sqr = total_sq - sql
            sse_r = sqr - sr * sr / nr
            score = sse_l + sse_r
            if score < min_score:
                min_score = score
        if min_score == np.inf:
            continue
        # pass 2: lowest threshold within tolerance of the minimum
        for i in range(n - 1):
            lo = col[order[i]]
            hi = col[order[i + 1]]
            if hi <= lo:
                continue
            nl = i + 1
            nr = n - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            sl = cum[i]
            sql = cumsq[i]
            sse_l = sql - sl * sl / nl
            sr = total - sl
            sqr = total_sq - sql
            sse_r = sqr - sr * sr / nr
            score = sse_l + sse_r
            if score <= min_score + tol:
                if score < best_score - tol:
                    best_score = score
                    best_feat = f
                    thr = (lo + hi) / 2.0
                    if thr == hi:  # midpoint rounded up; snap down so <= routes left
                        thr = lo
                    best_thr = thr
                break
    return best_feat, best_thr, best_score, parent_sse


_best_split_numba = backend.compile_kernel(_best_split_loops)


def best_split_numpy(X, y, feat_ids, min_leaf):
    n = X.shape[0]
    best_feat = -1
    best_thr = 0.0
    best_score = np.inf
    parent_sse = np.inf
    nl = np.arange(1, n, dtype=np.int64)
    nr = n - nl
    for f in feat_ids:
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        vs = col[order]
        ys = y[order]
        cum = np.cumsum(ys)
        cumsq = np.cumsum(ys * ys)
        total = cum[-1]
        total_sq = cumsq[-1]
        parent_sse = total_sq - total * total / n
        tol = _TIE_REL * (1.0 + abs(parent_sse))
        valid = (vs[1:] > vs[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
        if not valid.any():
            continue
        sl = cum[:-1]
        sql = cumsq[:-1]
        sse_l = sql - sl * sl / nl
        sr = total - sl
        sqr = total_sq - sql
        sse_r = sqr - sr * sr / nr
        score = np.where(valid, sse_l + sse_r, np.inf)
        min_score = score.min()
        i = int(np.argmax(score <= min_score + tol))  # first tied candidate
        if score[i] < best_score - tol:
            best_score = float(score[i])
            best_feat = int(f)
            thr = (vs[i] + vs[i + 1]) / 2.0
            if thr == vs[i + 1]:
                thr = vs[i]
            best_thr = float(thr)
    return best_feat, best_thr, best_score, parent_sse


best_split = backend.pick(_best_split_numba, best_split_numpy)
