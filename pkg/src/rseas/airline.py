"""Gaussian maximum likelihood for the airline model with sigma2 concentrated out."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cholesky_banded, solve_banded
from scipy.optimize import minimize

from .canonical import acgf
from .series import AirlineParams, FitResult, HeavyTailSpec, TimeSeries, difference_values
from .statespace import NumericalError

EPS = 1e-4
GRAD_STEP = 1e-5
GRAD_TOL = 1e-3
START_POINTS = ((0.0, 0.0), (0.9, 0.9), (-0.9, -0.9), (0.5, -0.5), (-0.5, 0.5))


class EstimationError(RuntimeError):
    """Optimisation failed; ``best`` holds the best fit found, if any."""

    def __init__(self, message, best: Optional[FitResult] = None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class OptimizerSettings:
    max_iterations: int = 200
    gtol: float = 1e-6
    xtol: float = 1e-8
    n_starts: int = 3

    def __post_init__(self):
        if min(self.max_iterations, self.gtol, self.xtol, self.n_starts) <= 0:
            raise ValueError("optimizer settings must be positive")


def to_unit(u):
    """Smooth bijection from the real line onto (-1 + EPS, 1 - EPS)."""
    return (1.0 - EPS) * np.tanh(u)


def from_unit(x):
    return np.arctanh(np.clip(np.asarray(x, dtype=float) / (1.0 - EPS), -1 + 1e-15, 1 - 1e-15))


def _differenced_factor(theta: float, Theta: float, s: int, n_w: int):
    """Banded Cholesky factor of the unit-variance covariance of the differenced series."""
    psi = AirlineParams(theta, Theta).ma_polynomial(s) if abs(theta) < 1 and abs(Theta) < 1 else None
    if psi is None:
        raise ValueError("MA parameters outside (-1, 1)")
    gam = acgf(psi)
    b = min(len(gam) - 1, n_w - 1)
    ab = np.empty((b + 1, n_w))
    for k in range(b + 1):
        ab[k] = gam[k]
    try:
        return cholesky_banded(ab, lower=True), b
    except np.linalg.LinAlgError as exc:
        raise NumericalError("differenced covariance is not positive definite") from exc


def concentrated_loglik(theta: float, Theta: float, y, s: int):
    """``(sigma2_hat, loglik)`` for raw data ``y`` of length ``n``.

    The loglik is the exact log density of ``w = (1-B)(1-B^s) y`` at
    ``sigma2_hat``, the maximiser for fixed ``(theta, Theta)``. It is computed
    from a banded Cholesky factor of the MA(s+1) covariance of ``w``, whose
    pivots are one-step prediction variances and never fall below 1.
    """
    w = difference_values(y, s)
    n_w = len(w)
    L, b = _differenced_factor(theta, Theta, s, n_w)
    z = solve_banded((b, 0), L, w)
    quad = float(z @ z)
    sigma2 = quad / n_w
    if not np.isfinite(sigma2) or sigma2 <= 0:
        raise NumericalError("degenerate quadratic form in sigma2 profiling")
    logdet = 2.0 * float(np.sum(np.log(L[0])))
    loglik = -0.5 * n_w * (np.log(2 * np.pi) + np.log(sigma2) + 1.0) - 0.5 * logdet
    return float(sigma2), float(loglik)


def profile_sigma2(theta: float, Theta: float, ts: TimeSeries):
    """Concentrated variance and loglik of a series at fixed MA parameters."""
    AirlineParams(theta, Theta)  # validates |theta|, |Theta| < 1
    return concentrated_loglik(theta, Theta, ts.values, ts.period)


def _objective(u, y, s):
    try:
        return -concentrated_loglik(*to_unit(u), y, s)[1]
    except (NumericalError, ValueError, np.linalg.LinAlgError):
        return 1e10


def numerical_gradient(f, x, step: float = GRAD_STEP) -> np.ndarray:
    """Central-difference gradient."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2 * step)
    return g


def _at_boundary(u) -> bool:
    return bool(np.max(np.abs(to_unit(u))) > 1 - 2 * EPS)


def fit_gaussian_values(y, s: int, settings: Optional[OptimizerSettings] = None,
                        starts: Optional[Sequence] = None) -> FitResult:
    """Gaussian airline fit on a raw array (used directly by outlier detection)."""
    settings = settings or OptimizerSettings()
    y = np.asarray(y, dtype=float)
    starts = [tuple(v) for v in starts] if starts is not None else list(START_POINTS[: settings.n_starts])
    best = None
    iterations = 0

    def run(start):
        nonlocal best, iterations
        res = minimize(
            _objective, from_unit(start), args=(y, s), method="BFGS",
            options={"maxiter": settings.max_iterations, "gtol": settings.gtol, "xrtol": settings.xtol},
        )
        iterations += int(res.nit)
        if np.isfinite(res.fun) and res.fun < 1e10 and (best is None or res.fun < best.fun):
            best = res

    for start in starts:
        run(start)
    # long line-search steps can carry BFGS to the spurious maximum at the
    # unit-root boundary; retry from the standard interior points
    if best is not None and _at_boundary(best.x):
        for start in START_POINTS:
            if start not in starts:
                run(start)
    if best is None:
        raise EstimationError("no start produced a finite likelihood")
    f = lambda v: _objective(v, y, s)
    x = best.x
    grad = numerical_gradient(f, x)
    # BFGS can stop on line-search precision loss short of a stationary point
    for method, opts in (("BFGS", {"gtol": settings.gtol * 1e-2}),
                         ("Nelder-Mead", {"xatol": 1e-9, "fatol": 1e-12})):
        if np.max(np.abs(grad)) < GRAD_TOL:
            break
        res = minimize(f, x, method=method, options={"maxiter": settings.max_iterations, **opts})
        iterations += int(res.nit)
        if res.fun <= f(x):
            x = res.x
            grad = numerical_gradient(f, x)
    best.x = x
    converged = bool(np.max(np.abs(grad)) < GRAD_TOL)
    theta, Theta = (float(v) for v in to_unit(best.x))
    sigma2, loglik = concentrated_loglik(theta, Theta, y, s)
    boundary = _at_boundary(best.x)
    warnings = ("parameter at invertibility boundary",) if boundary else ()
    fit = FitResult(
        params=AirlineParams(theta, Theta, sigma2),
        heavy=HeavyTailSpec.gaussian(),
        loglik=loglik,
        n_obs=len(y),
        n_params=3,
        converged=converged,
        iterations=iterations,
        boundary=boundary,
        warnings=warnings,
    )
    # a gradient check can fail legitimately at the boundary, where tanh flattens
    if not converged and not boundary:
        raise EstimationError(f"gradient check failed (max |g| = {np.max(np.abs(grad)):.2e})", fit)
    return fit


def fit_gaussian(ts: TimeSeries, settings: Optional[OptimizerSettings] = None) -> FitResult:
    """Exact Gaussian MLE of (theta, Theta, sigma2) by multistart BFGS.

    ``theta`` and ``Theta`` are searched through ``(1 - 1e-4) tanh(u)``;
    ``sigma2`` is concentrated out.
    """
    return fit_gaussian_values(ts.values, ts.period, settings)
