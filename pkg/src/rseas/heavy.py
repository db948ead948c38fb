"""Heavy-tailed irregular and trend models estimated by importance sampling.

The approximating Gaussian model replaces the non-Gaussian densities by
Gaussians with time-varying variances chosen so that its smoothed
disturbances coincide with the posterior mode of the true model. Draws from
the approximating model's simulation smoother are then reweighted by the
density ratio of the true and approximating disturbance densities.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, gammaln, logit, logsumexp

from .airline import EPS, EstimationError, OptimizerSettings, fit_gaussian, from_unit, to_unit
from .canonical import DecompositionError, InadmissibleError, decompose
from .series import (
    AirlineParams,
    CanonicalDecomposition,
    ComponentEstimates,
    FitResult,
    HeavyTailSpec,
    TimeSeries,
)
from .statespace import (
    NumericalError,
    StateSpaceModel,
    build_decomposition_ss,
    kalman_loglik,
    simulation_smoother,
    smooth_state,
    standard_normals,
)

DEFAULT_DRAWS = 250
MAX_LINEAR_ITER = 50
LINEAR_RTOL = 1e-8
FLOOR = 1e-8
MIN_ESS_FRACTION = 0.01
NU_UPPER = 1e6
PENALTY = 1e10
# the search objective carries Monte Carlo error far above these levels
SEARCH_RTOL = 1e-6
XATOL = 1e-3
FATOL = 1e-4


class ImportanceSamplingError(RuntimeError):
    """Importance weights degenerated (effective sample size below 1% of M)."""


class ApproximationError(RuntimeError):
    """Linearisation failed to converge; ``model`` holds the last iterate."""

    def __init__(self, message, model: Optional[StateSpaceModel] = None):
        super().__init__(message)
        self.model = model


def t_log_density(x, variance, nu):
    """Log density of a t variable with ``nu`` degrees of freedom and the given variance."""
    if not nu > 2:
        raise ValueError(f"t density needs nu > 2, got {nu}")
    if np.any(np.asarray(variance) <= 0):
        raise ValueError("variance must be positive")
    x = np.asarray(x, dtype=float)
    nu_scale2 = variance * (nu - 2.0)  # nu * scale^2
    return (
        gammaln(0.5 * (nu + 1)) - gammaln(0.5 * nu) - 0.5 * np.log(np.pi * nu_scale2)
        - 0.5 * (nu + 1) * np.log1p(x * x / nu_scale2)
    )


def _normal_logpdf(x, variance):
    return -0.5 * (np.log(2 * np.pi * variance) + x * x / variance)


def mixture_log_density(x, variance_base, rho, lam):
    """Log density of ``(1 - rho) N(0, v) + rho N(0, lam v)``."""
    if not 0 <= rho <= 1:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    if not lam > 1:
        raise ValueError(f"lambda must exceed 1, got {lam}")
    if variance_base <= 0:
        raise ValueError("variance must be positive")
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        a = np.log1p(-rho) + _normal_logpdf(x, variance_base)
        b = np.log(rho) + _normal_logpdf(x, lam * variance_base)
    return np.logaddexp(a, b)


def _irregular_logpdf(x, spec: HeavyTailSpec, var):
    if spec.irregular == "t":
        return t_log_density(x, var, spec.nu)
    if spec.irregular == "mixture":
        return mixture_log_density(x, var, spec.rho, spec.lam)
    return _normal_logpdf(x, var)


def _trend_logpdf(x, spec: HeavyTailSpec, var):
    if spec.trend == "t":
        return t_log_density(x, var, spec.nu_trend)
    return _normal_logpdf(x, var)


def _t_mode_variance(x, var, nu):
    # -x / (d/dx log p): equals the curvature variance at x = 0
    return ((nu - 2.0) * var + x * x) / (nu + 1.0)


def _mixture_mode_variance(x, var, rho, lam):
    with np.errstate(divide="ignore"):
        a = np.log1p(-rho) + _normal_logpdf(x, var)
        b = np.log(rho) + _normal_logpdf(x, lam * var)
    p1 = np.exp(b - np.logaddexp(a, b))
    return 1.0 / ((1.0 - p1) / var + p1 / (lam * var))


@dataclass(frozen=True)
class Linearization:
    """Converged approximating Gaussian model and its diagnostics."""

    model: StateSpaceModel
    obs_var: np.ndarray
    trend_var: np.ndarray
    iterations: int
    floored: bool


def _mode_map(y, model, decomp, spec, h, Q, inner):
    """One mode-matching update ``(h, Q) -> (h', Q')`` and whether a floor was hit."""
    st = smooth_state(model.with_variances(obs_var=h, state_var=Q), y, want_var=False)
    var_i, var_t = decomp.var_irregular, decomp.var_trend
    h_new = h
    if spec.irregular == "t":
        h_new = _t_mode_variance(st.irregular, var_i, spec.nu)
    elif spec.irregular == "mixture":
        h_new = _mixture_mode_variance(st.irregular, var_i, spec.rho, spec.lam)
    low = h_new < FLOOR * var_i
    h_new = np.where(low, FLOOR * var_i, h_new)
    Q_new = Q
    if spec.trend == "t" and var_t > 0:
        Q_new = Q.copy()
        q = _t_mode_variance(st.disturbances["trend"][inner], var_t, spec.nu_trend)
        Q_new[inner, 0] = np.maximum(q, FLOOR * var_t)
    return h_new, Q_new, bool(np.any(low))


def linearize(y, decomp: CanonicalDecomposition, spec: HeavyTailSpec,
              base: Optional[StateSpaceModel] = None, init=None,
              rtol: float = LINEAR_RTOL) -> Linearization:
    """Mode-matching Gaussian approximation of a heavy-tailed decomposition model.

    The variances are the fixed point of ``h_t = -e_t / (d/de log p)(e_t)``
    at the smoothed disturbances ``e_t`` of the current approximation, so the
    approximating smoother reproduces the posterior mode. The fixed-point
    iteration is accelerated by SQUAREM steps in log-variance coordinates.
    ``init`` optionally supplies starting ``(obs_var, trend_var)``.
    """
    y = np.asarray(y, dtype=float)
    n, s = len(y), decomp.period
    model = base if base is not None else build_decomposition_ss(decomp, s, n)
    h = np.full(n, decomp.var_irregular)
    Q = model.state_var.copy()
    if spec.is_gaussian:
        return Linearization(model, h, Q[:, 0].copy(), 0, False)
    if init is not None:
        h = np.asarray(init[0], dtype=float).copy()
        if spec.trend == "t":
            Q[:, 0] = init[1]
    # the disturbance at index n-1 enters alpha_{n+1}; it never touches the data
    inner = slice(0, n - 1)
    t_trend = spec.trend == "t" and decomp.var_trend > 0

    def pack(h, Q):
        return np.log(np.concatenate([h, Q[inner, 0]])) if t_trend else np.log(h)

    def unpack(x):
        if not t_trend:
            return np.exp(x), Q
        Qx = Q.copy()
        Qx[inner, 0] = np.exp(x[n:])
        return np.exp(x[:n]), Qx

    def F(x):
        hh, QQ = unpack(x)
        h1, Q1, fl = _mode_map(y, model, decomp, spec, hh, QQ, inner)
        return pack(h1, Q1), fl

    x = pack(h, Q)
    floored = False
    for it in range(1, MAX_LINEAR_ITER + 1):
        x1, fl = F(x)
        floored |= fl
        # relative change of the variances under one plain update
        if np.max(np.abs(np.expm1(x1 - x))) < rtol:
            x = x1
            break
        x2, _ = F(x1)
        r = x1 - x
        v = x2 - 2 * x1 + x
        nv = np.linalg.norm(v)
        if nv > 0:
            alpha = -max(1.0, np.linalg.norm(r) / nv)
            xs = x - 2 * alpha * r + alpha * alpha * v
            x = xs if np.all(np.isfinite(xs)) and np.max(np.abs(xs - x)) < 50 else x2
        else:
            x = x2
    else:
        h, Q = unpack(x)
        raise ApproximationError(
            f"linearisation did not converge in {MAX_LINEAR_ITER} iterations",
            model.with_variances(obs_var=h, state_var=Q),
        )
    h, Q = unpack(x)
    return Linearization(model.with_variances(obs_var=h, state_var=Q), h, Q[:, 0].copy(), it, floored)


def approximate_gaussian_model(ts: TimeSeries, decomp: CanonicalDecomposition,
                               spec: HeavyTailSpec) -> StateSpaceModel:
    """Approximating Gaussian model whose smoothed disturbances match the true mode."""
    return linearize(ts.values, decomp, spec).model


@dataclass(frozen=True)
class ImportanceSample:
    """Simulation-smoother draws and their importance log-weights."""

    irregular: np.ndarray
    trend_disturbance: np.ndarray
    log_weights: np.ndarray
    gaussian_loglik: float
    ess: float
    components: dict

    @property
    def n_draws(self) -> int:
        return len(self.log_weights)

    @property
    def weights(self) -> np.ndarray:
        """Normalised weights summing to one."""
        w = np.exp(self.log_weights - self.log_weights.max())
        return w / w.sum()


def _log_weights(draws, lin: Linearization, decomp, spec: HeavyTailSpec):
    eps = draws.irregular
    lw = np.sum(_irregular_logpdf(eps, spec, decomp.var_irregular)
                - _normal_logpdf(eps, lin.obs_var), axis=1)
    eta = draws.disturbances[:, :-1, 0]
    if spec.trend == "t" and decomp.var_trend > 0:
        q = lin.trend_var[:-1]
        lw = lw + np.sum(_trend_logpdf(eta, spec, decomp.var_trend) - _normal_logpdf(eta, q), axis=1)
    return lw


def _importance(y, decomp, spec, M, seed, normals=None, init=None, rtol=LINEAR_RTOL):
    if M < 2 or M % 2:
        raise ValueError("M must be an even number of draws, at least 2")
    lin = linearize(y, decomp, spec, init=init, rtol=rtol)
    gll = kalman_loglik(lin.model, y)
    draws = simulation_smoother(lin.model, y, M, seed, normals=normals)
    lw = np.zeros(M) if spec.is_gaussian else _log_weights(draws, lin, decomp, spec)
    if not np.all(np.isfinite(lw)):
        raise ImportanceSamplingError("non-finite importance weight")
    w = np.exp(lw - lw.max())
    ess = float(w.sum() ** 2 / np.sum(w * w))
    sample = ImportanceSample(
        irregular=draws.irregular,
        trend_disturbance=draws.disturbances[:, :, 0],
        log_weights=lw,
        gaussian_loglik=float(gll),
        ess=ess,
        components=draws.components,
    )
    if ess < MIN_ESS_FRACTION * M:
        raise ImportanceSamplingError(f"effective sample size {ess:.2f} below {MIN_ESS_FRACTION * M:g}")
    loglik = gll + logsumexp(lw) - np.log(M)
    # antithetic pairs are the independent units
    pair = 0.5 * (w[0::2] + w[1::2])
    mc_se = float(np.std(pair, ddof=1) / np.sqrt(len(pair)) / pair.mean()) if len(pair) > 1 else 0.0
    return float(loglik), mc_se, sample, lin


def is_loglik(ts: TimeSeries, decomp: CanonicalDecomposition, spec: HeavyTailSpec,
              M: int = DEFAULT_DRAWS, seed: int = 0):
    """Importance-sampling log-likelihood ``(loglik, mc_se, sample)``.

    ``loglik`` is on the same scale as the Gaussian likelihood: the log
    density of the differenced series. ``mc_se`` is the delta-method
    standard error of ``log(mean w)`` over antithetic pairs.
    """
    loglik, mc_se, sample, _ = _importance(ts.values, decomp, spec, M, seed)
    return loglik, mc_se, sample


# --- estimation ---------------------------------------------------------

def _family_template(family) -> HeavyTailSpec:
    if isinstance(family, HeavyTailSpec):
        return family
    if family == "t":
        return HeavyTailSpec.student(10.0)
    if family == "mixture":
        return HeavyTailSpec.mixture(0.05, 10.0)
    if family == "gaussian":
        return HeavyTailSpec.gaussian()
    raise ValueError(f"unknown family {family!r}")


def _nu_to_psi(nu):
    return np.log(nu - 2.0)


def _psi_to_nu(psi):
    return 2.0 + np.exp(min(psi, np.log(NU_UPPER)))


def _pack(params: AirlineParams, spec: HeavyTailSpec) -> np.ndarray:
    x = [*from_unit([params.theta, params.Theta]), np.log(params.sigma2)]
    if spec.irregular == "t":
        x.append(_nu_to_psi(spec.nu))
    elif spec.irregular == "mixture":
        x += [logit(spec.rho), np.log(spec.lam - 1.0)]
    if spec.trend == "t":
        x.append(_nu_to_psi(spec.nu_trend))
    return np.array(x, dtype=float)


def _unpack(x, template: HeavyTailSpec):
    theta, Theta = (float(v) for v in to_unit(x[:2]))
    params = AirlineParams(theta, Theta, float(np.exp(x[2])))
    i = 3
    kw = {}
    if template.irregular == "t":
        kw["nu"] = _psi_to_nu(x[i])
        i += 1
    elif template.irregular == "mixture":
        kw["rho"] = float(expit(x[i]))
        kw["lam"] = 1.0 + float(np.exp(x[i + 1]))
        i += 2
    if template.trend == "t":
        kw["nu_trend"] = _psi_to_nu(x[i])
    return params, replace(template, **kw)


def heavy_loglik(y, s: int, params: AirlineParams, spec: HeavyTailSpec, M: int, seed: int,
                 normals=None, init=None, rtol: float = LINEAR_RTOL):
    """Decompose, linearise and importance-sample in one call.

    Returns ``(loglik, mc_se, linearization)``; ``init`` warm-starts the
    linearisation from an earlier ``(obs_var, trend_var)``.
    """
    decomp = decompose(params, s)
    if not decomp.admissible:
        raise InadmissibleError("canonical irregular variance is negative")
    loglik, mc_se, _, lin = _importance(y, decomp, spec, M, seed, normals, init, rtol)
    return loglik, mc_se, lin


def fit_heavy(ts: TimeSeries, family="t", settings: Optional[OptimizerSettings] = None,
              M: int = DEFAULT_DRAWS, seed: int = 0, start: Optional[FitResult] = None) -> FitResult:
    """Maximise the importance-sampling likelihood of a heavy-tailed model.

    The canonical decomposition is recomputed for each candidate; candidates
    with an inadmissible decomposition, a failed linearisation or degenerate
    weights receive a large penalty. The standard normals driving the
    simulation smoother are fixed, so the objective is deterministic.
    """
    settings = settings or OptimizerSettings()
    template = _family_template(family)
    if template.is_gaussian:
        return start or fit_gaussian(ts, settings)
    y, s, n = ts.values, ts.period, ts.n
    if start is None:
        start = fit_gaussian(ts, settings)
    m_states = 2 + 2 + 2 * (s - 1)
    normals = standard_normals(n, 2, m_states, M // 2, seed)
    warm = {}

    def objective(x):
        try:
            params, spec = _unpack(x, template)
            loglik, _, lin = heavy_loglik(y, s, params, spec, M, seed, normals, warm.get("init"),
                                          rtol=SEARCH_RTOL)
            # successive simplex points are close, so the last mode is a good start
            warm["init"] = (lin.obs_var, lin.trend_var)
            return -loglik
        except (InadmissibleError, DecompositionError, ApproximationError, ImportanceSamplingError,
                NumericalError, ValueError, np.linalg.LinAlgError):
            return PENALTY

    x0 = _pack(start.params, template)
    if objective(x0) >= PENALTY:
        # the Gaussian optimum can be inadmissible; shrink toward a safe interior point
        for shrink in (0.9, 0.7, 0.5, 0.3):
            trial = x0.copy()
            trial[:2] = from_unit(shrink * to_unit(x0[:2]))
            if objective(trial) < PENALTY:
                x0 = trial
                break
        else:
            raise EstimationError("no admissible starting point for the heavy-tailed fit", start)
    psi_cap = np.log(NU_UPPER)
    bounds = [(None, None)] * len(x0)
    for i in _psi_indices(template):
        x0[i] = min(x0[i], psi_cap)
        bounds[i] = (None, psi_cap)
    simplex = np.vstack([x0] + [x0 + 0.25 * np.eye(len(x0))[i] for i in range(len(x0))])
    simplex = np.minimum(simplex, [b[1] if b[1] is not None else np.inf for b in bounds])
    res = minimize(
        objective, x0, method="Nelder-Mead", bounds=bounds,
        options={"maxiter": settings.max_iterations * len(x0), "xatol": XATOL, "fatol": FATOL,
                 "initial_simplex": simplex},
    )
    if not np.isfinite(res.fun) or res.fun >= PENALTY:
        raise EstimationError("heavy-tailed search found no admissible point", start)
    x = res.x.copy()
    params, spec = _unpack(x, template)
    loglik, mc_se, _ = heavy_loglik(y, s, params, spec, M, seed, normals)
    boundary = max(abs(params.theta), abs(params.Theta)) > 1 - 2 * EPS
    warnings = []
    if boundary:
        warnings.append("parameter at invertibility boundary")
    if any(res.x[i] >= psi_cap - 1e-3 for i in _psi_indices(template)):
        warnings.append("degrees of freedom at upper bound (numerically Gaussian)")
    fit = FitResult(
        params=params,
        heavy=spec,
        loglik=loglik,
        n_obs=n,
        n_params=3 + spec.n_extra,
        loglik_mc_se=mc_se,
        converged=bool(res.success),
        iterations=int(res.nit),
        boundary=boundary,
        warnings=tuple(warnings),
    )
    if not res.success:
        raise EstimationError(f"Nelder-Mead did not converge: {res.message}", fit)
    return fit


def _psi_indices(template: HeavyTailSpec):
    idx = []
    i = 3
    if template.irregular == "t":
        idx.append(i)
        i += 1
    elif template.irregular == "mixture":
        i += 2
    if template.trend == "t":
        idx.append(i)
    return idx


def extract_components_heavy(ts: TimeSeries, fit: FitResult, M: int = DEFAULT_DRAWS,
                             seed: int = 0) -> ComponentEstimates:
    """Importance-weighted posterior means of seasonal and trend.

    The irregular is the residual, so the reconstruction identity is exact.
    """
    decomp = decompose(fit.params, ts.period)
    if not decomp.admissible:
        raise InadmissibleError("canonical irregular variance is negative")
    _, _, sample, _ = _importance(ts.values, decomp, fit.heavy, M, seed)
    w = sample.weights
    seasonal = w @ sample.components["seasonal"]
    trend = w @ sample.components["trend"]

    def wvar(x, mean):
        return w @ (x - mean) ** 2

    return ComponentEstimates.from_signal(
        ts.values,
        seasonal,
        trend,
        var_seasonal=wvar(sample.components["seasonal"], seasonal),
        var_trend=wvar(sample.components["trend"], trend),
        var_irregular=wvar(sample.irregular, w @ sample.irregular),
    )
