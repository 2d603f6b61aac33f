# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. See ``_kernels_py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt, INFINITY

cnp.import_array()

cdef double TAU = 1e-12


cdef double RESCALE_AT = 1e140


cdef inline double _push(double[::1] row, double wi, Py_ssize_t top, double* bound) noexcept nogil:
    """Multiply the truncated polynomial by (1 + wi z).

    ``bound`` tracks an upper bound on the row maximum; once it passes
    RESCALE_AT the row is renormalised and the log scale returned.
    """
    cdef Py_ssize_t k
    cdef double m = 0.0
    for k in range(top, 0, -1):
        row[k] += wi * row[k - 1]
    bound[0] *= 1.0 + wi
    if bound[0] < RESCALE_AT:
        return 0.0
    for k in range(top + 1):
        if row[k] > m:
            m = row[k]
    for k in range(top + 1):
        row[k] /= m
    bound[0] = 1.0
    return log(m)


def inclusion_dp(w_in, Py_ssize_t n):
    cdef double[::1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef Py_ssize_t N = w.shape[0]
    if not (1 <= n <= N - 1):
        raise ValueError("inclusion_dp needs 1 <= n <= N - 1")
    cdef Py_ssize_t B = max(1, <Py_ssize_t>sqrt(<double>N))
    while B * B > N:
        B -= 1
    while (B + 1) * (B + 1) <= N:
        B += 1
    cdef Py_ssize_t nck = (N + B - 1) // B
    cdef double[:, ::1] ck = np.empty((nck, n + 1))
    cdef double[::1] ck_s = np.empty(nck)
    cdef double[::1] row = np.zeros(n + 1)
    cdef double[::1] suf = np.zeros(n + 1)
    cdef double[:, ::1] blk = np.empty((B, n + 1))
    cdef double[::1] blk_s = np.empty(B)
    pi_arr = np.empty(N)
    cdef double[::1] pi = pi_arr
    cdef Py_ssize_t i, k, c, start, stop, top
    cdef double s = 0.0, t = 0.0, log_en, acc
    cdef double bnd = 1.0, bnd_suf = 1.0
    cdef double[::1] ck_b = np.empty(nck)

    with nogil:
        row[0] = 1.0
        for i in range(N):
            if i % B == 0:
                ck[i // B, :] = row
                ck_s[i // B] = s
                ck_b[i // B] = bnd
            top = i + 1 if i + 1 < n else n
            s += _push(row, w[i], top, &bnd)
    if row[n] <= 0.0:
        raise ArithmeticError("e_n(w) underflowed")
    log_en = s + log(row[n])

    with nogil:
        suf[0] = 1.0
        for c in range(nck - 1, -1, -1):
            start = c * B
            stop = start + B if start + B < N else N
            row[:] = ck[c, :]
            s = ck_s[c]
            bnd = ck_b[c]
            for i in range(start, stop):
                blk[i - start, :] = row
                blk_s[i - start] = s
                top = i + 1 if i + 1 < n else n
                s += _push(row, w[i], top, &bnd)
            for i in range(stop - 1, start - 1, -1):
                acc = 0.0
                for k in range(n):
                    acc += blk[i - start, k] * suf[n - 1 - k]
                if acc > 0.0:
                    pi[i] = exp(log(w[i]) + log(acc) + blk_s[i - start] + t - log_en)
                else:
                    pi[i] = 0.0
                top = N - i if N - i < n else n
                t += _push(suf, w[i], top, &bnd_suf)
    return pi_arr, log_en


def split_scores(X_in, y_in, w_in, double min_leaf_weight):
    cdef double[:, :] X = np.asarray(X_in, dtype=np.float64)
    cdef double[::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef Py_ssize_t m = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t L = m - 1 if m > 1 else 0
    scores_arr = np.full((d, L), np.inf)
    thr_arr = np.full((d, L), np.nan)
    if m < 2:
        return scores_arr, thr_arr
    cdef double[:, ::1] scores = scores_arr
    cdef double[:, ::1] thr = thr_arr
    cdef Py_ssize_t j, k, a, b
    cdef double Ptot = 0.0, Qtot = 0.0, PL, QL, WL, PR, QR, WR
    cdef cnp.intp_t[::1] order
    for k in range(m):
        if y[k] > 0:
            Ptot += w[k]
        else:
            Qtot += w[k]
    for j in range(d):
        order = np.argsort(np.asarray(X_in)[:, j], kind="stable").astype(np.intp)
        PL = 0.0
        QL = 0.0
        for k in range(L):
            a = order[k]
            b = order[k + 1]
            if y[a] > 0:
                PL += w[a]
            else:
                QL += w[a]
            if not X[b, j] > X[a, j]:
                continue
            WL = PL + QL
            PR = Ptot - PL
            QR = Qtot - QL
            WR = PR + QR
            if WL < min_leaf_weight or WR < min_leaf_weight or WL <= 0 or WR <= 0:
                continue
            scores[j, k] = 2.0 * PL * QL / WL + 2.0 * PR * QR / WR
            thr[j, k] = 0.5 * (X[a, j] + X[b, j])
    return scores_arr, thr_arr


def smo_solve(K_in, y_in, C_in, double eps=1e-6, long max_iter=10_000_000):
    cdef double[:, ::1] K = np.ascontiguousarray(K_in, dtype=np.float64)
    cdef double[::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef double[::1] C = np.ascontiguousarray(C_in, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0]
    alpha_arr = np.zeros(n)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] G = -np.ones(n)
    cdef Py_ssize_t i, j, t
    cdef long it = 0
    cdef double Gmax, Gmax2, yG, gd, quad, obj, obj_min
    cdef double Ci, Cj, ai, aj, Kij, q, delta, diff, total, dai, daj
    cdef bint up, low

    with nogil:
        while it < max_iter:
            Gmax = -INFINITY
            i = -1
            for t in range(n):
                if y[t] > 0:
                    up = alpha[t] < C[t]
                else:
                    up = alpha[t] > 0
                if up and -y[t] * G[t] > Gmax:
                    Gmax = -y[t] * G[t]
                    i = t
            if i < 0:
                break
            Gmax2 = -INFINITY
            j = -1
            obj_min = INFINITY
            for t in range(n):
                if y[t] > 0:
                    low = alpha[t] > 0
                else:
                    low = alpha[t] < C[t]
                if not low:
                    continue
                yG = y[t] * G[t]
                if yG > Gmax2:
                    Gmax2 = yG
                gd = Gmax + yG
                if gd > 0:
                    quad = K[i, i] + K[t, t] - 2.0 * K[i, t]
                    if quad <= 0:
                        quad = TAU
                    obj = -(gd * gd) / quad
                    if obj <= obj_min:
                        obj_min = obj
                        j = t
            if Gmax + Gmax2 < eps or j < 0:
                break

            Ci = C[i]
            Cj = C[j]
            ai = alpha[i]
            aj = alpha[j]
            Kij = K[i, j]
            if y[i] != y[j]:
                q = K[i, i] + K[j, j] + 2.0 * y[i] * y[j] * Kij
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
                q = K[i, i] + K[j, j] - 2.0 * Kij
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
            for t in range(n):
                G[t] += y[t] * (y[i] * dai * K[i, t] + y[j] * daj * K[j, t])
            it += 1

    G_arr = np.asarray(G)
    y_arr = np.asarray(y)
    C_arr = np.asarray(C)
    pos = y_arr > 0
    yGa = y_arr * G_arr
    at_upper = alpha_arr >= C_arr
    at_lower = alpha_arr <= 0
    free = ~at_upper & ~at_lower
    if free.any():
        rho = float(yGa[free].mean())
    else:
        ub_mask = (at_upper & ~pos) | (at_lower & pos)
        lb_mask = (at_upper & pos) | (at_lower & ~pos)
        ub = yGa[ub_mask].min() if ub_mask.any() else np.inf
        lb = yGa[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2)
    return alpha_arr, rho, it
