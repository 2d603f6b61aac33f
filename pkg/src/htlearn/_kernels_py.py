"""Pure numpy implementations of the hot kernels.

These mirror ``_kernels.pyx`` one for one and are used when the compiled
extension is unavailable (or when ``HTLEARN_PURE=1``). Both backends must
return identical results up to floating point rounding.
"""

import math

import numpy as np

TAU = 1e-12
RESCALE_AT = 1e140


def _push(row, wi, top, bound):
    """Multiply the truncated polynomial ``row`` by ``(1 + wi z)`` in place.

    Returns ``(log_scale, bound)``; the row is renormalised only once the
    running bound on its maximum passes ``RESCALE_AT``.
    """
    row[1 : top + 1] += wi * row[:top]
    bound *= 1.0 + wi
    if bound < RESCALE_AT:
        return 0.0, bound
    m = row[: top + 1].max()
    row /= m
    return math.log(m), 1.0


def inclusion_dp(w, n):
    """First-order inclusion probabilities of conditional Poisson sampling.

    ``w`` holds the odds ``p_i / (1 - p_i)``. Returns ``(pi, log_en)`` where
    ``pi[i] = w_i e_{n-1}(w_{-i}) / e_n(w)`` and ``log_en = log e_n(w)``.

    Prefix and suffix generating polynomials are truncated at degree ``n`` and
    renormalised after every unit, with the log scale carried separately.
    Prefix rows are checkpointed every ``sqrt(N)`` units and recomputed per
    block, so memory stays at O(sqrt(N) n).
    """
    w = np.ascontiguousarray(w, dtype=np.float64)
    N = w.shape[0]
    if not 1 <= n <= N - 1:
        raise ValueError("inclusion_dp needs 1 <= n <= N - 1")
    B = max(1, math.isqrt(N))
    nck = (N + B - 1) // B
    ck = np.empty((nck, n + 1))
    ck_s = np.empty(nck)

    ck_b = np.empty(nck)
    row = np.zeros(n + 1)
    row[0] = 1.0
    s = 0.0
    bnd = 1.0
    for i in range(N):
        if i % B == 0:
            ck[i // B] = row
            ck_s[i // B] = s
            ck_b[i // B] = bnd
        ls, bnd = _push(row, w[i], min(i + 1, n), bnd)
        s += ls
    if row[n] <= 0.0:
        raise ArithmeticError("e_n(w) underflowed")
    log_en = s + math.log(row[n])

    pi = np.empty(N)
    suf = np.zeros(n + 1)
    suf[0] = 1.0
    t = 0.0
    bnd_suf = 1.0
    blk = np.empty((B, n + 1))
    blk_s = np.empty(B)
    for c in range(nck - 1, -1, -1):
        start = c * B
        stop = min(start + B, N)
        row = ck[c].copy()
        s = ck_s[c]
        bnd = ck_b[c]
        for i in range(start, stop):
            blk[i - start] = row
            blk_s[i - start] = s
            ls, bnd = _push(row, w[i], min(i + 1, n), bnd)
            s += ls
        for i in range(stop - 1, start - 1, -1):
            pre = blk[i - start]
            acc = float(np.dot(pre[:n], suf[n - 1 :: -1]))
            if acc > 0.0:
                pi[i] = math.exp(math.log(w[i]) + math.log(acc) + blk_s[i - start] + t - log_en)
            else:
                pi[i] = 0.0
            ls, bnd_suf = _push(suf, w[i], min(N - i, n), bnd_suf)
            t += ls
    return pi, log_en


def _push_log(row, lwi, top):
    row[1 : top + 1] = np.logaddexp(row[1 : top + 1], lwi + row[:top])


def inclusion_dp_log(w, n):
    """Log-domain version of ``inclusion_dp``.

    Slower, but every ``log e_k`` is carried exactly, so it survives odds
    spanning more orders of magnitude than a single row scale can hold.
    Same checkpointing scheme as ``inclusion_dp``.
    """
    w = np.ascontiguousarray(w, dtype=np.float64)
    N = w.shape[0]
    if not 1 <= n <= N - 1:
        raise ValueError("inclusion_dp needs 1 <= n <= N - 1")
    lw = np.log(w)
    B = max(1, math.isqrt(N))
    nck = (N + B - 1) // B
    ck = np.empty((nck, n + 1))
    row = np.full(n + 1, -np.inf)
    row[0] = 0.0
    for i in range(N):
        if i % B == 0:
            ck[i // B] = row
        _push_log(row, lw[i], min(i + 1, n))
    log_en = float(row[n])
    if not np.isfinite(log_en):
        raise ArithmeticError("e_n(w) is zero")

    pi = np.empty(N)
    suf = np.full(n + 1, -np.inf)
    suf[0] = 0.0
    blk = np.empty((B, n + 1))
    for c in range(nck - 1, -1, -1):
        start = c * B
        stop = min(start + B, N)
        row = ck[c].copy()
        for i in range(start, stop):
            blk[i - start] = row
            _push_log(row, lw[i], min(i + 1, n))
        for i in range(stop - 1, start - 1, -1):
            terms = blk[i - start][:n] + suf[n - 1 :: -1]
            m = terms.max()
            if np.isfinite(m):
                acc = m + math.log(float(np.exp(terms - m).sum()))
                pi[i] = math.exp(lw[i] + acc - log_en)
            else:
                pi[i] = 0.0
            _push_log(suf, lw[i], min(N - i, n))
    return pi, log_en


def split_scores(X, y, w, min_leaf_weight):
    """Weighted Gini scores of every candidate axis-aligned split.

    Returns ``(scores, thresholds)`` of shape ``(d, m - 1)``. ``scores[j, k]``
    is ``W_L G_L + W_R G_R`` for the k-th boundary in the sorted order of
    feature j, i.e. ``2 P_L Q_L / W_L + 2 P_R Q_R / W_R`` with P, Q the
    positive and negative masses. Invalid positions (tied values or a child
    lighter than ``min_leaf_weight``) score ``inf``.
    """
    X = np.asarray(X, dtype=np.float64)
    m, d = X.shape
    scores = np.full((d, max(m - 1, 0)), np.inf)
    thresholds = np.full((d, max(m - 1, 0)), np.nan)
    if m < 2:
        return scores, thresholds
    wp = np.where(y > 0, w, 0.0)
    wn = np.where(y > 0, 0.0, w)
    Ptot = wp.sum()
    Qtot = wn.sum()
    for j in range(d):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        PL = np.cumsum(wp[order])[:-1]
        QL = np.cumsum(wn[order])[:-1]
        WL = PL + QL
        PR = Ptot - PL
        QR = Qtot - QL
        WR = PR + QR
        valid = (xs[1:] > xs[:-1]) & (WL >= min_leaf_weight) & (WR >= min_leaf_weight)
        valid &= (WL > 0) & (WR > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            sc = 2.0 * PL * QL / WL + 2.0 * PR * QR / WR
        scores[j] = np.where(valid, sc, np.inf)
        thresholds[j] = np.where(valid, 0.5 * (xs[1:] + xs[:-1]), np.nan)
    return scores, thresholds


def smo_solve(K, y, C, eps=1e-6, max_iter=10_000_000):
    """Solve the SVM dual with per-sample box constraints.

    Minimises ``0.5 a'Qa - sum(a)`` with ``Q_ij = y_i y_j K_ij``,
    ``0 <= a_i <= C_i`` and ``sum(y a) = 0`` by sequential minimal
    optimisation with second-order working-set selection. Returns
    ``(alpha, rho, iterations)``; the decision function is
    ``sum_i a_i y_i K(x_i, x) - rho``.
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    n = y.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)
    QD = np.diag(K).copy()
    pos = y > 0
    it = 0
    while it < max_iter:
        # working set i: maximal violating index in I_up
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        score_up = np.where(up, -y * G, -np.inf)
        i = int(np.argmax(score_up))
        Gmax = score_up[i]
        if not np.isfinite(Gmax):
            break
        Ki = K[i]
        yG = y * G
        if not low.any():
            break
        Gmax2 = np.max(np.where(low, yG, -np.inf))
        grad_diff = Gmax + yG
        cand = low & (grad_diff > 0)
        if Gmax + Gmax2 < eps or not cand.any():
            break
        quad = QD[i] + QD - 2.0 * Ki
        quad = np.where(quad > 0, quad, TAU)
        obj = np.where(cand, -(grad_diff**2) / quad, np.inf)
        # last minimiser wins ties, matching the sequential scan
        j = int(n - 1 - np.argmin(obj[::-1]))

        Ci, Cj = C[i], C[j]
        ai, aj = alpha[i], alpha[j]
        Kij = Ki[j]
        if y[i] != y[j]:
            q = QD[i] + QD[j] + 2.0 * y[i] * y[j] * Kij
            if q <= 0:
                q = TAU
            delta = (-G[i] - G[j]) / q
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj = 0.0
                    ai = diff
            else:
                if ai < 0:
                    ai = 0.0
                    aj = -diff
            if diff > Ci - Cj:
                if ai > Ci:
                    ai = Ci
                    aj = Ci - diff
            else:
                if aj > Cj:
                    aj = Cj
                    ai = Cj + diff
        else:
            q = QD[i] + QD[j] - 2.0 * Kij
            if q <= 0:
                q = TAU
            delta = (G[i] - G[j]) / q
            total = ai + aj
            ai -= delta
            aj += delta
            if total > Ci:
                if ai > Ci:
                    ai = Ci
                    aj = total - Ci
            else:
                if aj < 0:
                    aj = 0.0
                    ai = total
            if total > Cj:
                if aj > Cj:
                    aj = Cj
                    ai = total - Cj
            else:
                if ai < 0:
                    ai = 0.0
                    aj = total
        dai = ai - alpha[i]
        daj = aj - alpha[j]
        alpha[i] = ai
        alpha[j] = aj
        G += y * (y[i] * dai * Ki + y[j] * daj * K[j])
        it += 1

    yG = y * G
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~at_upper & ~at_lower
    if free.any():
        rho = float(yG[free].mean())
    else:
        ub_mask = (at_upper & ~pos) | (at_lower & pos)
        lb_mask = (at_upper & pos) | (at_lower & ~pos)
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2)
    return alpha, rho, it
