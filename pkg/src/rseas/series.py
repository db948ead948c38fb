"""Core value types: observed series, airline parameters, decomposition and fit results."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np


class SeriesError(ValueError):
    """Invalid series content or length."""


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeSeries:
    """Observed series with its seasonal period.

    Parameters
    ----------
    values : array_like
        Observations in time order.
    period : int
        Seasonal periodicity ``s`` (12 monthly, 4 quarterly).
    start : tuple of int, optional
        ``(year, sub-period)`` of the first observation, 1-based sub-period.
        Metadata only; every algorithm indexes by position.
    logged : bool
        Whether ``values`` are natural logs of the raw data.
    """

    values: np.ndarray
    period: int
    start: Optional[Tuple[int, int]] = None
    logged: bool = False

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 1:
            raise SeriesError("values must be one-dimensional")
        if int(self.period) != self.period or self.period < 2:
            raise SeriesError(f"period must be an integer >= 2, got {self.period}")
        if len(values) < 3 * self.period:
            raise SeriesError(
                f"series of length {len(values)} is shorter than 3*period = {3 * self.period}"
            )
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise SeriesError(f"non-finite value at index {bad[0]}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "period", int(self.period))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def n(self) -> int:
        return len(self.values)

    def with_values(self, values) -> "TimeSeries":
        return TimeSeries(values, self.period, self.start, self.logged)

    def head(self, n: int) -> "TimeSeries":
        """First ``n`` observations (same start date)."""
        return TimeSeries(self.values[:n], self.period, self.start, self.logged)


@dataclass(frozen=True)
class AirlineParams:
    """Parameters of (1-B)(1-B^s) y_t = (1 - theta B)(1 - Theta B^s) e_t, Var(e_t) = sigma2."""

    theta: float
    Theta: float
    sigma2: float = 1.0

    def __post_init__(self):
        if not (abs(self.theta) < 1 and abs(self.Theta) < 1):
            raise ValueError(
                f"MA parameters must lie strictly inside (-1, 1): theta={self.theta}, Theta={self.Theta}"
            )
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")

    def ma_polynomial(self, s: int) -> np.ndarray:
        """Coefficients (ascending powers of B) of (1 - theta B)(1 - Theta B^s)."""
        psi = np.zeros(s + 2)
        psi[0] = 1.0
        psi[1] = -self.theta
        psi[s] = -self.Theta
        psi[s + 1] = self.theta * self.Theta
        return psi


@dataclass(frozen=True)
class CanonicalDecomposition:
    """Seasonal / trend / irregular models implied by an airline model.

    ``U(B) S_t = theta_S(B) omega_t``, ``(1-B)^2 T_t = theta_T(B) eta_t`` and
    ``I_t = eps_t`` with variances ``var_seasonal``, ``var_trend`` and
    ``var_irregular``. MA coefficient arrays are in ascending powers of B
    with a leading 1.
    """

    period: int
    seasonal_ma: np.ndarray
    trend_ma: np.ndarray
    var_seasonal: float
    var_trend: float
    var_irregular: float
    admissible: bool
    params: Optional[AirlineParams] = None

    def __post_init__(self):
        object.__setattr__(self, "seasonal_ma", _frozen(self.seasonal_ma))
        object.__setattr__(self, "trend_ma", _frozen(self.trend_ma))


@dataclass(frozen=True)
class ComponentEstimates:
    """Estimated components; ``seasonal + trend + irregular`` equals the observed series."""

    observed: np.ndarray
    seasonal: np.ndarray
    trend: np.ndarray
    irregular: np.ndarray
    var_seasonal: Optional[np.ndarray] = None
    var_trend: Optional[np.ndarray] = None
    var_irregular: Optional[np.ndarray] = None

    @classmethod
    def from_signal(cls, observed, seasonal, trend, **variances) -> "ComponentEstimates":
        """Build estimates with the irregular set as the exact residual."""
        observed = _frozen(observed)
        seasonal = _frozen(seasonal)
        trend = _frozen(trend)
        irregular = _frozen(observed - seasonal - trend)
        variances = {k: (None if v is None else _frozen(v)) for k, v in variances.items()}
        return cls(observed, seasonal, trend, irregular, **variances)

    @property
    def seasonally_adjusted(self) -> np.ndarray:
        return self.observed - self.seasonal

    @property
    def nonseasonal(self) -> np.ndarray:
        return self.trend + self.irregular


FAMILIES_IRREGULAR = ("gaussian", "t", "mixture")
FAMILIES_TREND = ("gaussian", "t")


@dataclass(frozen=True)
class HeavyTailSpec:
    """Noise families for the irregular and the trend innovation.

    Parameters
    ----------
    irregular : {"gaussian", "t", "mixture"}
    nu : float, optional
        Degrees of freedom of a t irregular, ``nu > 2``. The t density is
        scaled so its variance is the canonical irregular variance.
    rho, lam : float, optional
        Mixture weight and variance inflation of a mixture irregular:
        ``(1 - rho) N(0, s2) + rho N(0, lam s2)`` with ``0 <= rho <= 1``
        and ``lam > 1``.
    trend : {"gaussian", "t"}
    nu_trend : float, optional
        Degrees of freedom of a t trend innovation.
    """

    irregular: str = "gaussian"
    nu: Optional[float] = None
    rho: Optional[float] = None
    lam: Optional[float] = None
    trend: str = "gaussian"
    nu_trend: Optional[float] = None

    def __post_init__(self):
        if self.irregular not in FAMILIES_IRREGULAR:
            raise ValueError(f"unknown irregular family {self.irregular!r}")
        if self.trend not in FAMILIES_TREND:
            raise ValueError(f"unknown trend family {self.trend!r}")
        if self.irregular == "t" and not (self.nu is not None and self.nu > 2):
            raise ValueError("t irregular needs nu > 2")
        if self.irregular == "mixture":
            if self.rho is None or not 0 <= self.rho <= 1:
                raise ValueError("mixture needs 0 <= rho <= 1")
            if self.lam is None or not self.lam > 1:
                raise ValueError("mixture needs lam > 1")
        if self.trend == "t" and not (self.nu_trend is not None and self.nu_trend > 2):
            raise ValueError("t trend needs nu_trend > 2")

    @classmethod
    def gaussian(cls) -> "HeavyTailSpec":
        return cls()

    @classmethod
    def student(cls, nu: float, nu_trend: Optional[float] = None) -> "HeavyTailSpec":
        trend = "gaussian" if nu_trend is None else "t"
        return cls("t", nu=nu, trend=trend, nu_trend=nu_trend)

    @classmethod
    def mixture(cls, rho: float, lam: float) -> "HeavyTailSpec":
        return cls("mixture", rho=rho, lam=lam)

    @property
    def is_gaussian(self) -> bool:
        return self.irregular == "gaussian" and self.trend == "gaussian"

    @property
    def n_extra(self) -> int:
        """Noise parameters beyond theta, Theta and sigma2."""
        extra = {"gaussian": 0, "t": 1, "mixture": 2}[self.irregular]
        return extra + (self.trend == "t")

    def label(self) -> str:
        parts = {"gaussian": "G", "t": "T", "mixture": "M"}[self.irregular]
        return parts + ("+Tt" if self.trend == "t" else "")


@dataclass(frozen=True)
class FitResult:
    """Outcome of a maximum-likelihood fit.

    ``n_params`` counts the parameters actually estimated: theta, Theta and
    sigma2 plus one per extra noise parameter (nu, or rho and lambda, or
    nu_eta). ``loglik`` is the log density of the differenced series.
    """

    params: AirlineParams
    heavy: HeavyTailSpec
    loglik: float
    n_obs: int
    n_params: int
    loglik_mc_se: float = 0.0
    converged: bool = True
    iterations: int = 0
    boundary: bool = False
    warnings: Tuple[str, ...] = field(default_factory=tuple)


def log_transform(ts: TimeSeries) -> TimeSeries:
    """Natural log of a strictly positive series."""
    if ts.logged:
        raise SeriesError("series is already log transformed")
    bad = np.flatnonzero(ts.values <= 0)
    if bad.size:
        raise SeriesError(
            f"log transform needs positive values; value {ts.values[bad[0]]} at index {bad[0]}"
        )
    return TimeSeries(np.log(ts.values), ts.period, ts.start, logged=True)


def difference_values(y, s: int) -> np.ndarray:
    """Apply (1-B)(1-B^s) to a raw array; the result has length ``len(y) - s - 1``."""
    y = np.asarray(y, dtype=float)
    if len(y) < s + 2:
        raise SeriesError(f"need at least s + 2 = {s + 2} observations, got {len(y)}")
    return y[s + 1:] - y[s:-1] - y[1:-s] + y[:-s - 1]


def airline_difference(ts: TimeSeries) -> np.ndarray:
    """(1-B)(1-B^s) y_t for t = s+2, ..., n."""
    return difference_values(ts.values, ts.period)
