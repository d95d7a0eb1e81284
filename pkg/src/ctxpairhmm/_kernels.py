"""Compiled log-space recursions.

All kernels take encoded sequences and the log tables returned by
``ModelParams.log_tables``.  State ``k < K`` is match regime ``k``, ``K`` is
I_X and ``K + 1`` is I_Y.  The lattice origin holds no state: the first move
is drawn from ``pi0`` and a first match always emits with ``h``.
"""

import numpy as np
from numba import njit

NEG_INF = -np.inf


@njit(cache=True, inline="always")
def _lse(buf, count):
    mx = NEG_INF
    for q in range(count):
        if buf[q] > mx:
            mx = buf[q]
    if mx == NEG_INF:
        return NEG_INF
    s = 0.0
    for q in range(count):
        s += np.exp(buf[q] - mx)
    return mx + np.log(s)


@njit(cache=True)
def forward_kernel(x, y, logpi, logpi0, logf, logg, logh, loght):
    K = logh.shape[0]
    S = K + 2
    IX = K
    IY = K + 1
    n = x.shape[0]
    m = y.shape[0]
    a = np.full((S, n + 1, m + 1), NEG_INF)
    buf = np.empty(S)
    for i in range(n + 1):
        for j in range(m + 1):
            if i == 0 and j == 0:
                continue
            if i > 0 and j > 0:
                xi = x[i - 1]
                yj = y[j - 1]
                if i == 1 and j == 1:
                    for k in range(K):
                        a[k, 1, 1] = logpi0[k] + logh[k, xi, yj]
                else:
                    for k in range(K):
                        for u in range(S):
                            au = a[u, i - 1, j - 1]
                            if au == NEG_INF:
                                buf[u] = NEG_INF
                            elif u < K:
                                buf[u] = au + logpi[u, k] + loght[k, x[i - 2], y[j - 2], xi, yj]
                            else:
                                buf[u] = au + logpi[u, k] + logh[k, xi, yj]
                        a[k, i, j] = _lse(buf, S)
            if i > 0:
                if i == 1 and j == 0:
                    a[IX, 1, 0] = logpi0[IX] + logf[x[0]]
                else:
                    for u in range(S):
                        buf[u] = a[u, i - 1, j] + logpi[u, IX]
                    a[IX, i, j] = _lse(buf, S) + logf[x[i - 1]]
            if j > 0:
                if i == 0 and j == 1:
                    a[IY, 0, 1] = logpi0[IY] + logg[y[0]]
                else:
                    for u in range(S):
                        buf[u] = a[u, i, j - 1] + logpi[u, IY]
                    a[IY, i, j] = _lse(buf, S) + logg[y[j - 1]]
    return a


@njit(cache=True)
def backward_kernel(x, y, logpi, logpi0, logf, logg, logh, loght):
    """Backward lattice and the log-likelihood obtained by contracting it
    against ``pi0`` and the first emissions."""
    K = logh.shape[0]
    S = K + 2
    IX = K
    IY = K + 1
    n = x.shape[0]
    m = y.shape[0]
    b = np.full((S, n + 1, m + 1), NEG_INF)
    b[:, n, m] = 0.0
    buf = np.empty(S)
    for i in range(n, -1, -1):
        for j in range(m, -1, -1):
            if (i == n and j == m) or (i == 0 and j == 0):
                continue
            for u in range(S):
                # states that cannot occupy this cell
                if u < K and (i == 0 or j == 0):
                    continue
                if u == IX and i == 0:
                    continue
                if u == IY and j == 0:
                    continue
                cnt = 0
                if i < n and j < m:
                    for k in range(K):
                        if u < K:
                            e = loght[k, x[i - 1], y[j - 1], x[i], y[j]]
                        else:
                            e = logh[k, x[i], y[j]]
                        buf[cnt] = logpi[u, k] + e + b[k, i + 1, j + 1]
                        cnt += 1
                if i < n:
                    buf[cnt] = logpi[u, IX] + logf[x[i]] + b[IX, i + 1, j]
                    cnt += 1
                if j < m:
                    buf[cnt] = logpi[u, IY] + logg[y[j]] + b[IY, i, j + 1]
                    cnt += 1
                b[u, i, j] = _lse(buf, cnt)
    for k in range(K):
        buf[k] = logpi0[k] + logh[k, x[0], y[0]] + b[k, 1, 1]
    buf[IX] = logpi0[IX] + logf[x[0]] + b[IX, 1, 0]
    buf[IY] = logpi0[IY] + logg[y[0]] + b[IY, 0, 1]
    return b, _lse(buf, S)


@njit(cache=True, inline="always")
def _draw(buf, count, u):
    mx = NEG_INF
    for q in range(count):
        if buf[q] > mx:
            mx = buf[q]
    total = 0.0
    for q in range(count):
        buf[q] = np.exp(buf[q] - mx)
        total += buf[q]
    target = u * total
    acc = 0.0
    last = -1
    for q in range(count):
        if buf[q] > 0.0:
            last = q
            acc += buf[q]
            if target < acc:
                return q
    return last


@njit(cache=True)
def sample_kernel(a, x, y, logpi, logh, loght, draws):
    """Backward sampling of one path from the forward lattice ``a``.

    ``draws`` holds at least ``n + m`` uniforms; the result lists the moves
    from the first step to the last.
    """
    K = logh.shape[0]
    S = K + 2
    IX = K
    n = x.shape[0]
    m = y.shape[0]
    buf = np.empty(S)
    out = np.empty(n + m, dtype=np.int8)
    for u in range(S):
        buf[u] = a[u, n, m]
    v = _draw(buf, S, draws[0])
    out[0] = v
    length = 1
    i = n
    j = m
    while True:
        pi_ = i - 1 if (v < K or v == IX) else i
        pj = j - 1 if v != IX else j
        if pi_ == 0 and pj == 0:
            break
        for u in range(S):
            au = a[u, pi_, pj]
            if au == NEG_INF:
                buf[u] = NEG_INF
            elif v < K:
                if u < K:
                    e = loght[v, x[pi_ - 1], y[pj - 1], x[i - 1], y[j - 1]]
                else:
                    e = logh[v, x[i - 1], y[j - 1]]
                buf[u] = au + logpi[u, v] + e
            else:
                buf[u] = au + logpi[u, v]
        v = _draw(buf, S, draws[length])
        out[length] = v
        length += 1
        i = pi_
        j = pj
    return out[:length][::-1].copy()


# -- row-scaled linear-space variants (estimation fast path) ---------------
#
# Row i of the lattice is stored divided by exp(log_scale[i]); all states of a
# cell share a scale, which is all backward sampling needs.


@njit(cache=True)
def forward_scaled_kernel(x, y, pi, pi0, f, g, h, ht):
    K = h.shape[0]
    S = K + 2
    IX = K
    IY = K + 1
    n = x.shape[0]
    m = y.shape[0]
    a = np.zeros((S, n + 1, m + 1))
    log_scale = np.zeros(n + 1)
    prev_scale = 0.0
    for i in range(n + 1):
        # the origin carries absolute mass 1, i.e. exp(-scale of row 0) in row-0 units
        start = np.exp(-prev_scale) if i == 1 else 0.0
        for j in range(m + 1):
            if i == 0 and j == 0:
                continue
            if i > 0 and j > 0:
                xi = x[i - 1]
                yj = y[j - 1]
                if i == 1 and j == 1:
                    for k in range(K):
                        a[k, 1, 1] = start * pi0[k] * h[k, xi, yj]
                else:
                    for k in range(K):
                        s = 0.0
                        if i > 1 and j > 1:
                            for u in range(K):
                                s += a[u, i - 1, j - 1] * pi[u, k] * ht[k, x[i - 2], y[j - 2], xi, yj]
                        hk = h[k, xi, yj]
                        s += (a[IX, i - 1, j - 1] * pi[IX, k] + a[IY, i - 1, j - 1] * pi[IY, k]) * hk
                        a[k, i, j] = s
            if i > 0:
                if i == 1 and j == 0:
                    a[IX, 1, 0] = start * pi0[IX] * f[x[0]]
                else:
                    s = 0.0
                    for u in range(S):
                        s += a[u, i - 1, j] * pi[u, IX]
                    a[IX, i, j] = s * f[x[i - 1]]
            if j > 0:
                if i == 0 and j == 1:
                    a[IY, 0, 1] = pi0[IY] * g[y[0]]
                else:
                    s = 0.0
                    for u in range(S):
                        s += a[u, i, j - 1] * pi[u, IY]
                    a[IY, i, j] = s * g[y[j - 1]]
        mx = 0.0
        for u in range(S):
            for j in range(m + 1):
                if a[u, i, j] > mx:
                    mx = a[u, i, j]
        if i == 0 and m == 0:
            mx = 1.0
        if mx > 0.0:
            inv = 1.0 / mx
            for u in range(S):
                for j in range(m + 1):
                    a[u, i, j] *= inv
            log_scale[i] = prev_scale + np.log(mx)
        else:
            log_scale[i] = prev_scale
        prev_scale = log_scale[i]
    tot = 0.0
    for u in range(S):
        tot += a[u, n, m]
    return a, log_scale, log_scale[n] + np.log(tot)


@njit(cache=True, inline="always")
def _draw_linear(buf, count, u):
    total = 0.0
    for q in range(count):
        total += buf[q]
    target = u * total
    acc = 0.0
    last = -1
    for q in range(count):
        if buf[q] > 0.0:
            last = q
            acc += buf[q]
            if target < acc:
                return q
    return last


@njit(cache=True)
def sample_scaled_kernel(a, x, y, pi, h, ht, draws):
    K = h.shape[0]
    S = K + 2
    IX = K
    n = x.shape[0]
    m = y.shape[0]
    buf = np.empty(S)
    out = np.empty(n + m, dtype=np.int8)
    for u in range(S):
        buf[u] = a[u, n, m]
    v = _draw_linear(buf, S, draws[0])
    out[0] = v
    length = 1
    i = n
    j = m
    while True:
        pi_ = i - 1 if (v < K or v == IX) else i
        pj = j - 1 if v != IX else j
        if pi_ == 0 and pj == 0:
            break
        for u in range(S):
            w = a[u, pi_, pj] * pi[u, v]
            if v < K and w > 0.0:
                if u < K:
                    w *= ht[v, x[pi_ - 1], y[pj - 1], x[i - 1], y[j - 1]]
                else:
                    w *= h[v, x[i - 1], y[j - 1]]
            buf[u] = w
        v = _draw_linear(buf, S, draws[length])
        out[length] = v
        length += 1
        i = pi_
        j = pj
    return out[:length][::-1].copy()
