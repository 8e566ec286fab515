"""Compiled inner loops shared by the statistics, bootstrap and limit simulation.

Everything here works on float64 arrays and is compiled with ``nogil`` so that
callers can fan batches out over threads.  Index conventions follow the
cumulative-sum arrays: ``V[0] == 0`` and ``V[k]`` is the sum of the first ``k``
observations.
"""

import numpy as np
from numba import njit

EPS = np.finfo(np.float64).eps


@njit(cache=True, nogil=True)
def neumaier_sum(x):
    s = 0.0
    c = 0.0
    for v in x:
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c


@njit(cache=True, nogil=True)
def neumaier_cumsum(x):
    """Compensated running sums with a leading zero: out[k] = x[0] + ... + x[k-1]."""
    n = x.shape[0]
    out = np.zeros(n + 1)
    s = 0.0
    c = 0.0
    for i in range(n):
        v = x[i]
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out[i + 1] = s + c
    return out


@njit(cache=True, nogil=True)
def center(y):
    return y - neumaier_sum(y) / y.shape[0]


@njit(cache=True, nogil=True)
def zero_tolerances(y, x):
    """Thresholds below which a numerator/denominator counts as exactly zero.

    ``y`` is the raw series and ``x`` its centred copy.  The first threshold
    applies to cumulative-sum deviations, the second to sums of their squares.
    """
    n = y.shape[0]
    s = 0.0
    a = 0.0
    for i in range(n):
        s += abs(x[i])
        a += abs(y[i])
    tol = 32.0 * EPS * (n * s + a)
    return tol, n * tol * (tol + s)


@njit(cache=True, nogil=True)
def head_absdev_direct(V):
    """H[k] = max_{1<=i<=k} |V[i] - i V[k] / k| by direct O(n^2) evaluation."""
    n = V.shape[0] - 1
    H = np.zeros(n + 1)
    for k in range(1, n + 1):
        vk = V[k]
        m = 0.0
        for i in range(1, k + 1):
            d = abs(V[i] - i * vk / k)
            if d > m:
                m = d
        H[k] = m
    return H


@njit(cache=True, nogil=True)
def head_absdev_envelope(V):
    """Same quantity as :func:`head_absdev_direct` in O(n log n).

    max_i (V[i] - c i) over a prefix is attained on the upper convex hull of
    the points (i, V[i]); the minimum on the lower hull.  Points arrive in
    increasing i, so both hulls are maintained as monotone stacks and queried
    by binary search on edge slopes with c = V[k] / k.
    """
    n = V.shape[0] - 1
    H = np.zeros(n + 1)
    up = np.empty(n + 1, dtype=np.int64)
    lo = np.empty(n + 1, dtype=np.int64)
    up[0] = 0
    lo[0] = 0
    nu = 1
    nl = 1
    for k in range(1, n + 1):
        vk = V[k]
        while nu >= 2:
            a = up[nu - 2]
            b = up[nu - 1]
            cross = (b - a) * (vk - V[a]) - (V[b] - V[a]) * (k - a)
            if cross >= 0.0:
                nu -= 1
            else:
                break
        up[nu] = k
        nu += 1
        while nl >= 2:
            a = lo[nl - 2]
            b = lo[nl - 1]
            cross = (b - a) * (vk - V[a]) - (V[b] - V[a]) * (k - a)
            if cross <= 0.0:
                nl -= 1
            else:
                break
        lo[nl] = k
        nl += 1

        c = vk / k
        left = 0
        right = nu - 1
        while left < right:
            mid = (left + right) // 2
            i0 = up[mid]
            i1 = up[mid + 1]
            if V[i1] - V[i0] > c * (i1 - i0):
                left = mid + 1
            else:
                right = mid
        i = up[left]
        hi_val = V[i] - i * vk / k

        left = 0
        right = nl - 1
        while left < right:
            mid = (left + right) // 2
            i0 = lo[mid]
            i1 = lo[mid + 1]
            if V[i1] - V[i0] < c * (i1 - i0):
                left = mid + 1
            else:
                right = mid
        i = lo[left]
        lo_val = V[i] - i * vk / k

        m = hi_val
        if -lo_val > m:
            m = -lo_val
        if m < 0.0:
            m = 0.0
        H[k] = m
    return H


@njit(cache=True, nogil=True)
def head_sqdev(V):
    """E[k] = sum_{i<=k} (V[i] - i V[k] / k)^2 from prefix moments, O(n) total.

    Uses sum (V_i - c i)^2 = SV2 - 2 c SiV + c^2 Si2 with c = V[k] / k.
    """
    n = V.shape[0] - 1
    v2 = np.empty(n)
    iv = np.empty(n)
    for i in range(n):
        v2[i] = V[i + 1] * V[i + 1]
        iv[i] = (i + 1) * V[i + 1]
    SV2 = neumaier_cumsum(v2)
    SiV = neumaier_cumsum(iv)
    E = np.zeros(n + 1)
    for k in range(1, n + 1):
        c = V[k] / k
        si2 = k * (k + 1.0) * (2.0 * k + 1.0) / 6.0
        e = SV2[k] - 2.0 * c * SiV[k] + c * c * si2
        E[k] = e if e > 0.0 else 0.0
    return E


@njit(cache=True, nogil=True)
def _prepare(y):
    x = center(y)
    tol, tol_sq = zero_tolerances(y, x)
    V = neumaier_cumsum(x)
    W = neumaier_cumsum(x[::-1])
    return V, W, tol, tol_sq


@njit(cache=True, nogil=True)
def abs_denominators(V, W, envelope):
    """D[k] = head max on V at k plus the mirrored tail max (head max on W at n-k)."""
    n = V.shape[0] - 1
    if envelope:
        Hf = head_absdev_envelope(V)
        Hb = head_absdev_envelope(W)
    else:
        Hf = head_absdev_direct(V)
        Hb = head_absdev_direct(W)
    D = np.zeros(n + 1)
    for k in range(1, n + 1):
        D[k] = Hf[k] + Hb[n - k]
    return D


@njit(cache=True, nogil=True)
def sq_denominators(V, W):
    n = V.shape[0] - 1
    Ef = head_sqdev(V)
    Eb = head_sqdev(W)
    E = np.zeros(n + 1)
    for k in range(1, n + 1):
        E[k] = Ef[k] + Eb[n - k]
    return E


@njit(cache=True, nogil=True)
def q_from_parts(V, D, tol):
    n = V.shape[0] - 1
    vn = V[n]
    best = 0.0
    degenerate = False
    for k in range(1, n + 1):
        num = abs(V[k] - k * vn / n)
        den = D[k]
        if den <= tol:
            degenerate = True
        if num <= tol:
            continue
        if den <= tol:
            best = np.inf
            continue
        val = num / den
        if val > best:
            best = val
    return best, degenerate


@njit(cache=True, nogil=True)
def r_from_parts(V, E, tol, tol_sq):
    n = V.shape[0] - 1
    vn = V[n]
    total = 0.0
    degenerate = False
    for k in range(1, n + 1):
        num = abs(V[k] - k * vn / n)
        den = E[k]
        if den <= tol_sq:
            degenerate = True
        if num <= tol:
            continue
        if den <= tol_sq:
            total = np.inf
            continue
        total += num * num / den
    return total, degenerate


@njit(cache=True, nogil=True)
def q_stat(y, envelope):
    V, W, tol, tol_sq = _prepare(y)
    D = abs_denominators(V, W, envelope)
    return q_from_parts(V, D, tol)


@njit(cache=True, nogil=True)
def r_stat(y):
    V, W, tol, tol_sq = _prepare(y)
    E = sq_denominators(V, W)
    return r_from_parts(V, E, tol, tol_sq)


@njit(cache=True, nogil=True)
def estimator_objective(y, envelope):
    """Objective of the changepoint estimator for k = 1..n (index 0 unused)."""
    V, W, tol, tol_sq = _prepare(y)
    D = abs_denominators(V, W, envelope)
    n = V.shape[0] - 1
    vn = V[n]
    obj = np.zeros(n + 1)
    for k in range(1, n + 1):
        shift = k * vn / n
        num = abs(V[k] - shift) + abs((vn - V[n - k]) - shift)
        if num <= tol:
            continue
        if D[k] <= tol:
            obj[k] = np.inf
        else:
            obj[k] = num / D[k]
    return obj


@njit(cache=True, nogil=True)
def qr_rows(Y, want_q, want_r, envelope, q_out, r_out):
    """Evaluate the Q and/or R statistic for every row of ``Y`` in place."""
    for b in range(Y.shape[0]):
        V, W, tol, tol_sq = _prepare(Y[b])
        if want_q:
            D = abs_denominators(V, W, envelope)
            q_out[b] = q_from_parts(V, D, tol)[0]
        if want_r:
            E = sq_denominators(V, W)
            r_out[b] = r_from_parts(V, E, tol, tol_sq)[0]


@njit(cache=True, nogil=True)
def bridge_sup_rows(P, out):
    """max_j |P[j] - (j/m) P[m]| for every row of a path matrix with P[:, 0] == 0."""
    m = P.shape[1] - 1
    for b in range(P.shape[0]):
        pm = P[b, m]
        best = 0.0
        for j in range(1, m):
            d = abs(P[b, j] - j * pm / m)
            if d > best:
                best = d
        out[b] = best
