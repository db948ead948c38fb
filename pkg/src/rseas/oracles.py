"""Brute-force reference computations for validating the fast algorithms.

These build dense covariance matrices directly from model definitions and
share no code with the state space recursions.
"""

import numpy as np
from scipy.linalg import toeplitz
from scipy.stats import multivariate_normal


def airline_autocovariances(theta, Theta, sigma2, s, nlags):
    """Autocovariances of ``(1-theta B)(1-Theta B^s) e_t`` by direct convolution."""
    psi = np.zeros(s + 2)
    psi[0] = 1.0
    psi[1] -= theta
    psi[s] -= Theta
    psi[s + 1] += theta * Theta
    gam = np.zeros(nlags)
    for k in range(min(nlags, len(psi))):
        gam[k] = sigma2 * np.dot(psi[: len(psi) - k], psi[k:])
    return gam


def differenced_loglik(w, theta, Theta, sigma2, s):
    """Exact log density of differenced data from the full n x n covariance."""
    w = np.asarray(w, dtype=float)
    cov = toeplitz(airline_autocovariances(theta, Theta, sigma2, s, len(w)))
    return multivariate_normal(np.zeros(len(w)), cov).logpdf(w)


def acgf_spectrum(ma, variance, lam):
    """``variance * |ma(e^{-i lam})|^2`` by complex evaluation."""
    z = np.exp(-1j * np.asarray(lam, dtype=float))
    val = np.polyval(np.asarray(ma, dtype=float)[::-1], z)
    return variance * np.abs(val) ** 2


def _component_matrices(ar, ma, n):
    """Write ``x_1..x_n`` as ``X @ init + L @ e`` for ``ar(B) x_t = ma(B) e_t``.

    ``init`` holds the ``p`` values ``x_1, x_0, ..., x_{2-p}`` and ``e`` the
    disturbances ``e_{2-q}, ..., e_n``.
    """
    ar = np.asarray(ar, dtype=float)
    ma = np.asarray(ma, dtype=float)
    p, q = len(ar) - 1, len(ma) - 1
    ne = n + q - 1
    # rows for times 2-p .. n
    times = np.arange(2 - p, n + 1)
    X = np.zeros((len(times), p))
    L = np.zeros((len(times), ne))
    for i in range(p):
        X[p - 1 - i, i] = 1.0  # time 1-i sits at row p-1-i
    for r in range(p, len(times)):
        t = times[r]
        for i in range(1, p + 1):
            X[r] -= ar[i] * X[r - i]
            L[r] -= ar[i] * L[r - i]
        for j in range(q + 1):
            L[r, (t - j) - (2 - q)] += ma[j]
    keep = times >= 1
    return X[keep], L[keep]


def joint_gaussian_components(decomp, y):
    """Posterior means and variances of trend and seasonal given y.

    Trend and seasonal are generated by their own recursions with flat priors
    on their starting values and iid earlier disturbances; the irregular is
    white noise. Conditioning is done with dense GLS algebra.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    s = decomp.period
    XT, LT = _component_matrices([1.0, -2.0, 1.0], decomp.trend_ma, n)
    XS, LS = _component_matrices(np.ones(s), decomp.seasonal_ma, n)
    LT = LT * np.sqrt(decomp.var_trend)
    LS = LS * np.sqrt(decomp.var_seasonal)
    zT = np.zeros_like(XS)
    zS = np.zeros_like(XT)
    Xt = np.hstack([XT, zT])
    Xs = np.hstack([zS, XS])
    Xy = Xt + Xs
    eT, eS = LT.shape[1], LS.shape[1]
    Lt = np.hstack([LT, np.zeros((n, eS)), np.zeros((n, n))])
    Ls = np.hstack([np.zeros((n, eT)), LS, np.zeros((n, n))])
    Li = np.hstack([np.zeros((n, eT + eS)), np.sqrt(decomp.var_irregular) * np.eye(n)])
    Ly = Lt + Ls + Li
    Sy = Ly @ Ly.T
    Si = np.linalg.inv(Sy)
    G = Xy.T @ Si @ Xy
    delta = np.linalg.solve(G, Xy.T @ Si @ y)
    resid = y - Xy @ delta
    out = {}
    for name, Xc, Lc in (("trend", Xt, Lt), ("seasonal", Xs, Ls)):
        C = Lc @ Ly.T
        mean = Xc @ delta + C @ Si @ resid
        B = Xc - C @ Si @ Xy
        var = np.diag(Lc @ Lc.T - C @ Si @ C.T + B @ np.linalg.solve(G, B.T))
        out[name] = (mean, var)
    return out
