"""Iterative additive-outlier and level-shift detection under the Gaussian airline model."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from scipy.linalg import solve_banded

from .airline import OptimizerSettings, _differenced_factor, fit_gaussian_values
from .series import FitResult, TimeSeries

AO = "AO"
LS = "LS"
KINDS = (AO, LS)
MAX_ROUNDS = 20
GLS_ALTERNATIONS = 2
MAD_SCALE = 1.4826
MAX_LEVERAGE = 0.5


class OutlierDetectionError(RuntimeError):
    """Runaway detection or add/remove cycling."""


@dataclass(frozen=True)
class Outlier:
    index: int
    kind: str
    coefficient: float
    t_stat: float


@dataclass(frozen=True)
class OutlierSet:
    entries: Tuple[Outlier, ...] = ()
    critical_value: float = 3.5

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def keys(self):
        return {(o.index, o.kind) for o in self.entries}


def default_critical_value(n: int) -> float:
    """3.5 up to 200 observations, 4.0 beyond."""
    return 3.5 if n <= 200 else 4.0


def regressor(kind: str, index: int, n: int) -> np.ndarray:
    """Unit pulse (AO) or unit step from ``index`` onward (LS)."""
    x = np.zeros(n)
    if kind == AO:
        x[index] = 1.0
    elif kind == LS:
        x[index:] = 1.0
    else:
        raise ValueError(f"unknown outlier kind {kind!r}")
    return x


def _candidates(n: int):
    # a step from t=0 is a constant and a step at n-1 duplicates the last pulse
    return [(AO, t) for t in range(n)] + [(LS, t) for t in range(1, n - 1)]


def _design(keys, n):
    if not keys:
        return np.zeros((n, 0))
    return np.column_stack([regressor(k, t, n) for k, t in keys])


def _whitened(theta, Theta, s, columns):
    """Standardized innovations of the differenced columns.

    ``(1-B)(1-B^s)`` removes the nonstationary part exactly, and the banded
    Cholesky factor of the MA(s+1) covariance whitens what is left.
    """
    C = columns
    W = C[s + 1:] - C[s:-1] - C[1:-s] + C[:-s - 1]
    L, b = _differenced_factor(theta, Theta, s, W.shape[0])
    return solve_banded((b, 0), L, W)


def _residualize(A, B):
    """Residuals of the columns of ``B`` after least squares on ``A``, and leverages."""
    if A.shape[1] == 0:
        return B, np.zeros(B.shape[0])
    q, _ = np.linalg.qr(A)
    return B - q @ (q.T @ B), np.sum(q * q, axis=1)


def _robust_sigma(resid, leverage):
    # studentize so every residual has variance sigma^2; points pinned by a
    # pulse regressor carry no information
    keep = leverage < MAX_LEVERAGE
    r = resid[keep] / np.sqrt(1.0 - leverage[keep])
    return MAD_SCALE * np.median(np.abs(r - np.median(r)))


def _gls(theta, Theta, s, y, keys):
    """GLS coefficients, robust t-statistics and residual scale for a regressor set."""
    n = len(y)
    V = _whitened(theta, Theta, s, np.column_stack([y, _design(keys, n)]))
    vy, VR = V[:, 0], V[:, 1:]
    if not keys:
        return np.zeros(0), np.zeros(0), _robust_sigma(vy, np.zeros(len(vy)))
    beta, *_ = np.linalg.lstsq(VR, vy, rcond=None)
    _, lev = _residualize(VR, V[:, :1])
    sigma = _robust_sigma(vy - VR @ beta, lev)
    cov = np.linalg.inv(VR.T @ VR)
    return beta, beta / (sigma * np.sqrt(np.diag(cov))), sigma


def candidate_t_stats(theta, Theta, s, y, keys=()):
    """t-statistic of every AO/LS candidate added alone to the current set.

    Returns ``(candidates, coefficients, t)``; candidates already in ``keys``
    get ``t = 0``. The residual scale is 1.4826 times the median absolute
    deviation of the whitened residuals after the current regressors.
    """
    n = len(y)
    keys = list(keys)
    cands = _candidates(n)
    X = _design(keys, n)
    C = np.column_stack([regressor(k, t, n) for k, t in cands])
    V = _whitened(theta, Theta, s, np.column_stack([y, X, C]))
    k = len(keys)
    R, lev = _residualize(V[:, 1:1 + k], np.hstack([V[:, :1], V[:, 1 + k:]]))
    ry, RC = R[:, 0], R[:, 1:]
    sigma = _robust_sigma(ry, lev)
    ss = np.sum(RC * RC, axis=0)
    ok = ss > 1e-10 * np.max(ss)
    beta = np.where(ok, RC.T @ ry / np.where(ok, ss, 1.0), 0.0)
    t = np.where(ok, beta * np.sqrt(np.where(ok, ss, 0.0)) / sigma, 0.0)
    taken = set(keys)
    for i, c in enumerate(cands):
        if c in taken:
            t[i] = 0.0
    return cands, beta, t


def _fit_with_regressors(y, s, keys, settings, previous: Optional[FitResult]):
    """Alternate Gaussian MLE and GLS for the regression effects."""
    beta = np.zeros(len(keys))
    X = _design(keys, len(y))
    fit = previous
    for _ in range(GLS_ALTERNATIONS if keys else 1):
        starts = None if fit is None else [(fit.params.theta, fit.params.Theta)]
        fit = fit_gaussian_values(y - X @ beta, s, settings, starts=starts)
        beta, t, _ = _gls(fit.params.theta, fit.params.Theta, s, y, keys)
    return fit, beta, t


def detect_outliers(ts: TimeSeries, C: Optional[float] = None,
                    settings: Optional[OptimizerSettings] = None):
    """Forward addition of the largest candidate above ``C``, then a backward pass.

    Returns ``(OutlierSet, FitResult)``; the fit is the Gaussian airline fit
    of the outlier-adjusted series, with one extra parameter per outlier.
    """
    n, s = ts.n, ts.period
    y = ts.values
    C = default_critical_value(n) if C is None else float(C)
    keys = []
    dropped = set()
    fit, beta, t = _fit_with_regressors(y, s, keys, settings, None)
    for _ in range(MAX_ROUNDS):
        cands, _, tc = candidate_t_stats(fit.params.theta, fit.params.Theta, s, y, keys)
        # a regressor removed by the backward pass may not re-enter
        tc = np.where([c in dropped for c in cands], 0.0, tc)
        best = int(np.argmax(np.abs(tc)))
        if abs(tc[best]) > C:
            keys.append(cands[best])
            if len(keys) > n / 5:
                raise OutlierDetectionError(f"more than n/5 = {n / 5:g} outliers detected")
        elif len(keys) and np.min(np.abs(t)) < C:
            dropped.add(keys.pop(int(np.argmin(np.abs(t)))))
        else:
            break
        fit, beta, t = _fit_with_regressors(y, s, keys, settings, fit)
    else:
        raise OutlierDetectionError(f"detection did not settle in {MAX_ROUNDS} rounds")
    order = np.argsort([k[1] for k in keys], kind="stable")
    entries = tuple(Outlier(keys[i][1], keys[i][0], float(beta[i]), float(t[i])) for i in order)
    outliers = OutlierSet(entries, C)
    fit = replace(fit, n_params=fit.n_params + len(entries))
    return outliers, fit


def adjust_for_outliers(ts: TimeSeries, outliers: OutlierSet) -> TimeSeries:
    """Series with the estimated pulse and step effects removed."""
    y = ts.values.copy()
    for o in outliers:
        y -= o.coefficient * regressor(o.kind, o.index, ts.n)
    return ts.with_values(y)
