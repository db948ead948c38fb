"""Linear Gaussian state space machinery for the decomposed airline model.

Models take the form::

    y_t = Z alpha_t + eps_t,            eps_t ~ N(0, h_t)
    alpha_{t+1} = T alpha_t + R zeta_t,  zeta_t ~ N(0, diag(q_t))
    alpha_1 = A delta + alpha*_1,       alpha*_1 ~ N(0, P_*)

with ``delta`` diffuse. The diffuse part is handled exactly by augmentation:
``delta`` is treated as a flat-prior coefficient vector that is profiled out
of the innovations by generalised least squares (de Jong's augmented
filter). The reported log-likelihood adds ``log|det X_{1:d}|`` to the
flat-prior marginal likelihood, which makes it equal to the Gaussian log
density of the differenced series ``(1-B)(1-B^s) y``.

Each ARIMA-type component ``a(B) x_t = c(B) e_t`` (``deg a = p``,
``deg c = q``) is written with ``p`` lagged levels followed by ``q``
"pending MA" states ``m_t[j] = sum_i c_{j+1+i} e_{t-i}``; only the levels
are diffuse.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np

from . import _kernels
from .canonical import InadmissibleError
from .series import CanonicalDecomposition, ComponentEstimates

PREDICTION_FLOOR = 1e-12


class NumericalError(ArithmeticError):
    """A prediction variance fell below the numerical floor."""


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """Time-varying linear Gaussian state space model with a diffuse block.

    Attributes
    ----------
    transition : (m, m) ndarray
    selection : (m, r) ndarray
    state_var : (n, r) ndarray
        Variances of the disturbances entering ``alpha_{t+1}``.
    design : (m,) ndarray
    obs_var : (n,) ndarray
    init_cov : (m, m) ndarray
        Covariance of the proper part of the initial state.
    diffuse : (m, d) ndarray
        Loading of the diffuse initial vector.
    component_names, component_rows :
        Named linear combinations of the state reported by the smoother.
    disturbance_names :
        Names of the columns of ``selection``.
    """

    transition: np.ndarray
    selection: np.ndarray
    state_var: np.ndarray
    design: np.ndarray
    obs_var: np.ndarray
    init_cov: np.ndarray
    diffuse: np.ndarray
    component_names: Tuple[str, ...] = ()
    component_rows: Optional[np.ndarray] = None
    disturbance_names: Tuple[str, ...] = ()
    _csr: tuple = field(default=None, repr=False)

    def __post_init__(self):
        f = lambda a: np.ascontiguousarray(a, dtype=float)
        T = f(self.transition)
        m = T.shape[0]
        object.__setattr__(self, "transition", T)
        n = len(np.atleast_1d(self.obs_var))
        state_var = f(np.reshape(self.state_var, (n, -1)) if np.size(self.state_var) else
                      np.zeros((n, np.shape(self.state_var)[-1] if np.ndim(self.state_var) == 2 else 0)))
        object.__setattr__(self, "state_var", state_var)
        object.__setattr__(self, "selection", f(np.reshape(self.selection, (m, state_var.shape[1]))))
        object.__setattr__(self, "design", f(self.design))
        object.__setattr__(self, "obs_var", f(self.obs_var))
        object.__setattr__(self, "init_cov", f(self.init_cov))
        d = np.size(self.diffuse) // m if m else 0
        object.__setattr__(self, "diffuse", f(np.reshape(self.diffuse, (m, d))))
        rows = self.component_rows
        rows = np.zeros((0, m)) if rows is None or np.size(rows) == 0 else np.reshape(rows, (-1, m))
        object.__setattr__(self, "component_rows", f(rows))
        if self.state_var.shape != (n, self.selection.shape[1]):
            raise ValueError("state_var must have shape (n, r)")
        if self.design.shape != (m,) or self.init_cov.shape != (m, m):
            raise ValueError("inconsistent state dimensions")
        if np.any(self.obs_var <= 0):
            raise ValueError("observation variances must be positive")
        if np.any(self.state_var < 0):
            raise ValueError("state disturbance variances must be nonnegative")
        nz = T != 0
        indptr = np.concatenate([[0], np.cumsum(nz.sum(axis=1))]).astype(np.int64)
        indices = np.nonzero(nz)[1].astype(np.int64)
        object.__setattr__(self, "_csr", (indptr, indices, T[nz].copy()))

    @property
    def n(self) -> int:
        return len(self.obs_var)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_diffuse(self) -> int:
        return self.diffuse.shape[1]

    def with_variances(self, obs_var=None, state_var=None) -> "StateSpaceModel":
        """Copy with replaced per-time observation and/or state variances."""
        return replace(
            self,
            obs_var=self.obs_var if obs_var is None else obs_var,
            state_var=self.state_var if state_var is None else state_var,
            _csr=None,
        )

    def component(self, name: str) -> int:
        return self.component_names.index(name)


def _arima_block(ar, ma, variance):
    """Transition, loading, proper initial covariance and diffuse loading for one component."""
    ar = np.asarray(ar, dtype=float)
    ma = np.asarray(ma, dtype=float)
    p = len(ar) - 1
    q = len(ma) - 1
    dim = p + q
    T = np.zeros((dim, dim))
    T[0, :p] = -ar[1:]
    if q:
        T[0, p] = 1.0
    for i in range(1, p):
        T[i, i - 1] = 1.0
    for j in range(q - 1):
        T[p + j, p + j + 1] = 1.0
    R = np.zeros(dim)
    R[0] = 1.0
    R[p:] = ma[1:]
    P = np.zeros((dim, dim))
    if q:
        # m_j = sum_i c_{j+1+i} e_{-i}: rows of a shifted Hankel matrix
        tail = np.concatenate([ma[1:], np.zeros(q)])
        H = np.lib.stride_tricks.sliding_window_view(tail, q)[:q]
        P[p:, p:] = variance * (H @ H.T)
    A = np.zeros((dim, p))
    A[:p, :p] = np.eye(p)
    return T, R, P, A


def _assemble(blocks, obs_var, n, names):
    dims = [b[0].shape[0] for b in blocks]
    m = sum(dims)
    d = sum(b[3].shape[1] for b in blocks)
    T = np.zeros((m, m))
    R = np.zeros((m, len(blocks)))
    P = np.zeros((m, m))
    A = np.zeros((m, d))
    Z = np.zeros(m)
    rows = np.zeros((len(blocks), m))
    Q = np.zeros((n, len(blocks)))
    o = 0
    dd = 0
    for i, (Tb, Rb, Pb, Ab, var) in enumerate(blocks):
        k = Tb.shape[0]
        T[o:o + k, o:o + k] = Tb
        R[o:o + k, i] = Rb
        P[o:o + k, o:o + k] = Pb
        A[o:o + k, dd:dd + Ab.shape[1]] = Ab
        Z[o] = 1.0
        rows[i, o] = 1.0
        Q[:, i] = var
        o += k
        dd += Ab.shape[1]
    return StateSpaceModel(
        transition=T,
        selection=R,
        state_var=Q,
        design=Z,
        obs_var=np.broadcast_to(np.asarray(obs_var, dtype=float), (n,)).copy(),
        init_cov=P,
        diffuse=A,
        component_names=tuple(names),
        component_rows=rows,
        disturbance_names=tuple(names),
    )


def seasonal_sum_polynomial(s: int) -> np.ndarray:
    return np.ones(s)


def build_decomposition_ss(decomp: CanonicalDecomposition, s: int, n: int) -> StateSpaceModel:
    """State space form of ``y_t = S_t + T_t + I_t`` for a canonical decomposition.

    Components are ``trend`` (state block first) and ``seasonal``; the
    observation variance is the canonical irregular variance.
    """
    if not decomp.admissible:
        raise InadmissibleError("decomposition is inadmissible (negative irregular variance)")
    if n < 1:
        raise ValueError("model length must be positive")
    if s != decomp.period:
        raise ValueError(f"period {s} does not match decomposition period {decomp.period}")
    if decomp.var_irregular <= 0:
        raise ValueError("canonical irregular variance is zero; observation noise must be positive")
    trend = _arima_block([1.0, -2.0, 1.0], decomp.trend_ma, decomp.var_trend)
    seas = _arima_block(seasonal_sum_polynomial(s), decomp.seasonal_ma, decomp.var_seasonal)
    return _assemble(
        [trend + (decomp.var_trend,), seas + (decomp.var_seasonal,)],
        decomp.var_irregular,
        n,
        ("trend", "seasonal"),
    )


def build_airline_ss(theta: float, Theta: float, sigma2: float, s: int, n: int) -> StateSpaceModel:
    """Signal-plus-noise state space form of the airline model.

    A white noise of variance ``sigma2 (1-|theta|)^2 (1-|Theta|)^2 / 32``
    (half a lower bound on the pseudo-spectrum) is split off, so the
    representation exists for every invertible parameter pair, admissible or
    not. The likelihood is identical to that of any other exact form.
    """
    from .canonical import acgf, spectral_factorize

    psi = np.zeros(s + 2)
    psi[[0, 1, s, s + 1]] = [1.0, -theta, -Theta, theta * Theta]
    diff = np.zeros(s + 2)
    diff[[0, 1, s, s + 1]] = [1.0, -1.0, -1.0, 1.0]
    noise = sigma2 * (1 - abs(theta)) ** 2 * (1 - abs(Theta)) ** 2 / 32.0
    ma, var = spectral_factorize(sigma2 * acgf(psi) - noise * acgf(diff))
    block = _arima_block(diff, ma, var)
    return _assemble([block + (var,)], noise, n, ("signal",))


@dataclass
class _Filtered:
    model: StateSpaceModel
    V: np.ndarray
    F: np.ndarray
    K: np.ndarray
    Ps: np.ndarray
    WA: np.ndarray
    n_data: int
    # diffuse pieces
    VX: np.ndarray
    WX: np.ndarray  # W T^{t-1} A - WA(X), (n, c, d)
    S: np.ndarray
    delta: np.ndarray  # (d, n_data)
    logdet_H: float

    @property
    def adjusted(self) -> np.ndarray:
        return self.V[:, : self.n_data] - self.VX @ self.delta

    @property
    def adjusted_states(self) -> np.ndarray:
        return self.WA[:, :, : self.n_data] + np.einsum("tcd,dk->tck", self.WX, self.delta)


def _propagate_diffuse(model: StateSpaceModel):
    """Observation and component responses ``Z T^{t-1} A`` and ``W T^{t-1} A``."""
    indptr, indices, vals = model._csr
    return _kernels.propagate(indptr, indices, vals, model.design, model.component_rows,
                              model.diffuse, model.n)


def _run_filter(model: StateSpaceModel, Y: np.ndarray) -> _Filtered:
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != model.n:
        raise ValueError(f"data length {Y.shape[0]} does not match model length {model.n}")
    k = Y.shape[1]
    X, WXdet = _propagate_diffuse(model)
    d = X.shape[1]
    data = np.ascontiguousarray(np.hstack([Y, X]))
    indptr, indices, vals = model._csr
    V, F, K, Ps, WA, status = _kernels.kfilter(
        indptr, indices, vals, model.design, model.selection, model.state_var,
        model.obs_var, model.init_cov, data, model.component_rows,
    )
    if status:
        raise NumericalError(f"prediction variance below {PREDICTION_FLOOR} at t={status - 1}")
    VX = V[:, k:]
    WX = WXdet - WA[:, :, k:]
    if d:
        Fi = 1.0 / F
        S = (VX * Fi[:, None]).T @ VX
        s = (VX * Fi[:, None]).T @ V[:, :k]
        try:
            delta = np.linalg.solve(S, s)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("diffuse block is not identified by the data") from exc
        sign, logdet_H = np.linalg.slogdet(X[:d])
        if sign == 0:
            raise NumericalError("diffuse initial block is singular")
    else:
        S = np.zeros((0, 0))
        delta = np.zeros((0, k))
        logdet_H = 0.0
    return _Filtered(model, V, F, K, Ps, WA, k, VX, WX, S, delta, float(logdet_H))


def _loglik_pieces(flt: _Filtered):
    """``(sum log F, quadratic forms per column, log|S|, log|det H|, n - d)``."""
    v = flt.adjusted
    quad = np.sum(v * v / flt.F[:, None], axis=0)
    logdet_S = np.linalg.slogdet(flt.S)[1] if flt.S.size else 0.0
    return float(np.sum(np.log(flt.F))), quad, float(logdet_S), flt.logdet_H, flt.model.n - flt.model.n_diffuse


def kalman_loglik(m: StateSpaceModel, y) -> float:
    """Exact Gaussian log-likelihood.

    With a diffuse block this is the log density of the differenced data:
    the flat-prior marginal likelihood plus ``log|det X_{1:d}|``.
    """
    flt = _run_filter(m, y)
    sum_logf, quad, logdet_s, logdet_h, n_eff = _loglik_pieces(flt)
    return float(-0.5 * (n_eff * np.log(2 * np.pi) + sum_logf + quad[0] + logdet_s) + logdet_h)


def _smooth_columns(flt: _Filtered, want_var: bool):
    model = flt.model
    k = flt.n_data
    Vcols = np.hstack([flt.adjusted, -flt.VX])
    WAcols = np.concatenate([flt.adjusted_states, flt.WX], axis=2)
    indptr, indices, vals = model._csr
    return _kernels.ksmooth(
        indptr, indices, vals, model.transition, model.design, model.selection,
        model.state_var, model.obs_var, flt.F, flt.K, flt.Ps,
        np.ascontiguousarray(Vcols), np.ascontiguousarray(WAcols), model.component_rows, want_var,
    )


@dataclass(frozen=True)
class SmoothedState:
    """Smoothed means (and optionally variances) of everything a model reports."""

    components: Dict[str, np.ndarray]
    irregular: np.ndarray
    disturbances: Dict[str, np.ndarray]
    component_var: Optional[Dict[str, np.ndarray]] = None
    irregular_var: Optional[np.ndarray] = None
    filtered_last: Optional[Dict[str, float]] = None


def smooth_state(m: StateSpaceModel, y, want_var: bool = True) -> SmoothedState:
    """Fixed-interval smoother under the flat prior on the diffuse block."""
    flt = _run_filter(m, y)
    U, ETA, WAL, var_eps, var_eta, var_w = _smooth_columns(flt, want_var)
    comps = {name: WAL[:, i, 0].copy() for i, name in enumerate(m.component_names)}
    dist = {name: ETA[:, i, 0].copy() for i, name in enumerate(m.disturbance_names)}
    irregular = m.obs_var * U[:, 0]
    cvar = ivar = None
    if want_var:
        d = m.n_diffuse
        Sinv = np.linalg.inv(flt.S) if d else np.zeros((0, 0))
        G = WAL[:, :, 1:]  # (n, c, d) sensitivity to the diffuse block
        extra = np.einsum("tcd,de,tce->tc", G, Sinv, G)
        cvar = {name: var_w[:, i, i] + extra[:, i] for i, name in enumerate(m.component_names)}
        Ge = m.obs_var[:, None] * U[:, 1:]
        ivar = var_eps + np.einsum("td,de,te->t", Ge, Sinv, Ge)
    # filtered state at the last time point, for the end-point identity
    t = m.n - 1
    a_last = flt.adjusted_states[t, :, 0]
    gain = (m.component_rows @ flt.Ps[t] @ m.design) / flt.F[t]
    filt = a_last + gain * flt.adjusted[t, 0]
    filtered_last = {name: float(filt[i]) for i, name in enumerate(m.component_names)}
    return SmoothedState(comps, irregular, dist, cvar, ivar, filtered_last)


def smooth(m: StateSpaceModel, y) -> ComponentEstimates:
    """Smoothed seasonal, trend and irregular for a decomposition model."""
    st = smooth_state(m, y, want_var=True)
    y = np.asarray(y, dtype=float)
    return ComponentEstimates.from_signal(
        y,
        st.components["seasonal"],
        st.components["trend"],
        var_seasonal=st.component_var["seasonal"],
        var_trend=st.component_var["trend"],
        var_irregular=st.irregular_var,
    )


@dataclass(frozen=True)
class SimulationDraws:
    """Draws from the conditional distribution of disturbances and components given y.

    Arrays are indexed ``[draw, time]`` (``[draw, time, disturbance]`` for
    ``disturbances``). Draw ``2i + 1`` is the antithetic reflection of draw
    ``2i`` about the conditional mean.
    """

    irregular: np.ndarray
    disturbances: np.ndarray
    components: Dict[str, np.ndarray]
    mean_irregular: np.ndarray
    mean_disturbances: np.ndarray
    mean_components: Dict[str, np.ndarray]

    @property
    def n_draws(self) -> int:
        return self.irregular.shape[0]


def _psd_sqrt(P):
    w, U = np.linalg.eigh(0.5 * (P + P.T))
    return U * np.sqrt(np.clip(w, 0.0, None))


def standard_normals(n: int, r: int, m: int, n_base: int, seed: int):
    """Standard normal inputs of the simulation smoother, fixed by ``seed``."""
    rng = np.random.default_rng(seed)
    z0 = rng.standard_normal((m, n_base))
    zq = rng.standard_normal((n, r, n_base))
    zh = rng.standard_normal((n, n_base))
    return z0, zq, zh


def simulation_smoother(m: StateSpaceModel, y, n_draws: int, seed: int,
                        normals=None) -> SimulationDraws:
    """Conditional draws by mean correction, with antithetic pairing.

    Each base draw ``x`` is formed as ``x_hat(y) + x+ - x_hat(y+)`` from an
    unconditional simulation ``(x+, y+)`` and is followed by its reflection
    ``2 x_hat(y) - x``.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be at least 1")
    y = np.asarray(y, dtype=float)
    n, r, mdim = m.n, m.selection.shape[1], m.n_states
    n_base = (n_draws + 1) // 2
    z0, zq, zh = normals if normals is not None else standard_normals(n, r, mdim, n_base, seed)
    a1 = _psd_sqrt(m.init_cov) @ z0
    indptr, indices, vals = m._csr
    Yp, EPSp, ETAp, WAp = _kernels.ksimulate(
        indptr, indices, vals, m.design, m.selection, np.sqrt(m.state_var),
        np.sqrt(m.obs_var), np.ascontiguousarray(a1), zq, zh, m.component_rows,
    )
    flt = _run_filter(m, np.hstack([y[:, None], Yp]))
    U, ETA, WAL, *_ = _smooth_columns(flt, False)
    k = 1 + n_base
    eps_hat = m.obs_var[:, None] * U[:, :k]
    eta_hat = ETA[:, :, :k]
    w_hat = WAL[:, :, :k]

    def combine(hat, plus):
        base = hat[..., :1] + plus - hat[..., 1:]
        anti = 2.0 * hat[..., :1] - base
        out = np.stack([base, anti], axis=-1).reshape(base.shape[:-1] + (2 * n_base,))
        return np.moveaxis(out[..., :n_draws], -1, 0)

    irr = combine(eps_hat, EPSp)
    dist = combine(eta_hat, ETAp)               # (M, n, r)
    wdraw = combine(w_hat, WAp)                 # (M, n, c)
    comps = {name: wdraw[:, :, i] for i, name in enumerate(m.component_names)}
    return SimulationDraws(
        irregular=irr,
        disturbances=dist,
        components=comps,
        mean_irregular=eps_hat[:, 0],
        mean_disturbances=eta_hat[:, :, 0],
        mean_components={name: w_hat[:, i, 0] for i, name in enumerate(m.component_names)},
    )
