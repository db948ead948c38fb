"""Numba kernels for batched Kalman filtering, smoothing and simulation.

The transition matrix is passed in CSR form (``indptr, indices, data``);
the models built in this package have a few nonzeros per row. Every data
column shares the same covariance recursions, so a batch of ``k`` columns
costs one covariance pass plus ``k`` cheap mean passes.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _csr_mat(indptr, indices, data, X):
    m = indptr.size - 1
    k = X.shape[1]
    out = np.zeros((m, k))
    for i in range(m):
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            v = data[p]
            for c in range(k):
                out[i, c] += v * X[j, c]
    return out


@njit(cache=True)
def _csr_matT(indptr, indices, data, X):
    # T' @ X
    m = indptr.size - 1
    k = X.shape[1]
    out = np.zeros((m, k))
    for i in range(m):
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            v = data[p]
            for c in range(k):
                out[j, c] += v * X[i, c]
    return out


@njit(cache=True)
def _csr_vec(indptr, indices, data, x):
    m = indptr.size - 1
    out = np.zeros(m)
    for i in range(m):
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * x[indices[p]]
        out[i] = acc
    return out


@njit(cache=True)
def _tpt(indptr, indices, data, P):
    # T P T' for symmetric P
    TP = _csr_mat(indptr, indices, data, P)
    m = P.shape[0]
    out = np.zeros((m, m))
    for i in range(m):
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            v = data[p]
            for c in range(m):
                out[c, i] += v * TP[c, j]
    return out


@njit(cache=True)
def kfilter(indptr, indices, data, Z, R, Q, H, P1, Y, W):
    """Forward pass with ``a_1 = 0`` and ``P_1 = P1``.

    Returns innovations ``V`` (n, k), variances ``F`` (n), gains ``K`` (n, m),
    predicted covariances ``Ps`` (n, m, m), projected predicted states
    ``WA`` (n, c, k) and a status code (0, or 1 + index of the first
    prediction variance at or below 1e-12).
    """
    n, k = Y.shape
    m = Z.size
    c = W.shape[0]
    r = R.shape[1]
    V = np.zeros((n, k))
    F = np.ones(n)
    K = np.zeros((n, m))
    Ps = np.zeros((n, m, m))
    WA = np.zeros((n, c, k))
    a = np.zeros((m, k))
    an = np.zeros((m, k))
    P = P1.copy()
    TP = np.zeros((m, m))
    PZ = np.zeros(m)
    Kt = np.zeros(m)
    status = 0
    for t in range(n):
        Ps[t] = P
        for ci in range(c):
            for j in range(m):
                w = W[ci, j]
                if w != 0.0:
                    for col in range(k):
                        WA[t, ci, col] += w * a[j, col]
        for i in range(m):
            acc = 0.0
            for j in range(m):
                if Z[j] != 0.0:
                    acc += P[i, j] * Z[j]
            PZ[i] = acc
        f = H[t]
        for i in range(m):
            f += Z[i] * PZ[i]
        if not f > 1e-12:
            status = t + 1
            break
        F[t] = f
        for col in range(k):
            acc = Y[t, col]
            for j in range(m):
                if Z[j] != 0.0:
                    acc -= Z[j] * a[j, col]
            V[t, col] = acc
        for i in range(m):
            acc = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                acc += data[p] * PZ[indices[p]]
            Kt[i] = acc / f
            K[t, i] = Kt[i]
        # a <- T a + K v
        for i in range(m):
            for col in range(k):
                acc = Kt[i] * V[t, col]
                for p in range(indptr[i], indptr[i + 1]):
                    acc += data[p] * a[indices[p], col]
                an[i, col] = acc
        a, an = an, a
        # P <- T P T' - f K K' + R Q R'
        for i in range(m):
            for j in range(m):
                acc = 0.0
                for p in range(indptr[i], indptr[i + 1]):
                    acc += data[p] * P[indices[p], j]
                TP[i, j] = acc
        for i in range(m):
            for j in range(i, m):
                acc = -f * Kt[i] * Kt[j]
                for p in range(indptr[j], indptr[j + 1]):
                    acc += data[p] * TP[i, indices[p]]
                for l in range(r):
                    acc += R[i, l] * Q[t, l] * R[j, l]
                P[i, j] = acc
                P[j, i] = acc
    return V, F, K, Ps, WA, status


@njit(cache=True)
def ksmooth(indptr, indices, data, Tdense, Z, R, Q, H, F, K, Ps, V, WA, W, want_var):
    """Backward pass on (possibly adjusted) innovations ``V``.

    Returns ``U`` (n, k) with smoothed irregular ``H_t * U_t``, smoothed state
    disturbances ``ETA`` (n, r, k), smoothed projected states ``WAL``
    (n, c, k), and when ``want_var`` the conditional variances of the
    irregular (n), state disturbances (n, r) and projected states (n, c, c).
    """
    n, k = V.shape
    m = Z.size
    c = W.shape[0]
    r = R.shape[1]
    U = np.zeros((n, k))
    ETA = np.zeros((n, r, k))
    WAL = np.zeros((n, c, k))
    var_eps = np.zeros(n)
    var_eta = np.zeros((n, r))
    var_w = np.zeros((n, c, c))
    rv = np.zeros((m, k))
    N = np.zeros((m, m))
    for t in range(n - 1, -1, -1):
        for l in range(r):
            for col in range(k):
                acc = 0.0
                for i in range(m):
                    acc += R[i, l] * rv[i, col]
                ETA[t, l, col] = Q[t, l] * acc
        for col in range(k):
            acc = V[t, col] / F[t]
            for i in range(m):
                acc -= K[t, i] * rv[i, col]
            U[t, col] = acc
        if want_var:
            NK = N @ K[t]
            D = 1.0 / F[t] + K[t] @ NK
            var_eps[t] = H[t] - H[t] * H[t] * D
            for l in range(r):
                acc = 0.0
                for i in range(m):
                    for j in range(m):
                        acc += R[i, l] * N[i, j] * R[j, l]
                var_eta[t, l] = Q[t, l] - Q[t, l] * Q[t, l] * acc
        rprev = _csr_matT(indptr, indices, data, rv)
        for i in range(m):
            for col in range(k):
                rprev[i, col] += Z[i] * U[t, col]
        WP = W @ Ps[t]
        for ci in range(c):
            for col in range(k):
                acc = WA[t, ci, col]
                for j in range(m):
                    acc += WP[ci, j] * rprev[j, col]
                WAL[t, ci, col] = acc
        if want_var:
            L = Tdense - np.outer(K[t], Z)
            N = np.outer(Z, Z) / F[t] + L.T @ N @ L
            N = 0.5 * (N + N.T)
            var_w[t] = (W @ Ps[t]) @ W.T - WP @ N @ WP.T
        rv = rprev
    return U, ETA, WAL, var_eps, var_eta, var_w


@njit(cache=True)
def ksimulate(indptr, indices, data, Z, R, sdQ, sdH, a1, zq, zh, W):
    """Unconditional draws from the model started at ``a1`` (m, M).

    ``zq`` (n, r, M) and ``zh`` (n, M) are standard normals. Returns the
    observations (n, M), irregulars (n, M), state disturbances (n, r, M) and
    projected states (n, c, M).
    """
    n, r, M = zq.shape
    m = Z.size
    c = W.shape[0]
    Y = np.zeros((n, M))
    EPS = np.zeros((n, M))
    ETA = np.zeros((n, r, M))
    WAx = np.zeros((n, c, M))
    a = a1.copy()
    for t in range(n):
        for col in range(M):
            e = sdH[t] * zh[t, col]
            EPS[t, col] = e
            acc = e
            for j in range(m):
                acc += Z[j] * a[j, col]
            Y[t, col] = acc
        for ci in range(c):
            for j in range(m):
                w = W[ci, j]
                if w != 0.0:
                    for col in range(M):
                        WAx[t, ci, col] += w * a[j, col]
        for l in range(r):
            for col in range(M):
                ETA[t, l, col] = sdQ[t, l] * zq[t, l, col]
        a = _csr_mat(indptr, indices, data, a)
        for i in range(m):
            for l in range(r):
                ril = R[i, l]
                if ril != 0.0:
                    for col in range(M):
                        a[i, col] += ril * ETA[t, l, col]
    return Y, EPS, ETA, WAx


@njit(cache=True)
def propagate(indptr, indices, data, Z, W, A, n):
    """``Z T^t A`` (n, d) and ``W T^t A`` (n, c, d) for t = 0..n-1."""
    m, d = A.shape
    c = W.shape[0]
    X = np.zeros((n, d))
    WX = np.zeros((n, c, d))
    state = A.copy()
    for t in range(n):
        for j in range(m):
            zj = Z[j]
            if zj != 0.0:
                for col in range(d):
                    X[t, col] += zj * state[j, col]
            for ci in range(c):
                w = W[ci, j]
                if w != 0.0:
                    for col in range(d):
                        WX[t, ci, col] += w * state[j, col]
        state = _csr_mat(indptr, indices, data, state)
    return X, WX
