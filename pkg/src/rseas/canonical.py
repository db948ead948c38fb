"""Canonical (minimum-zero) seasonal/trend/irregular split of the airline model.

Every spectrum here is written as a rational function of ``x = cos(lambda)``.
A symmetric autocovariance sequence ``g_0, ..., g_q`` corresponds to the
cosine polynomial ``g_0 + 2 sum_k g_k cos(k lambda)``, i.e. the Chebyshev
series with coefficients ``(g_0, 2 g_1, ..., 2 g_q)``. The airline
pseudo-spectrum is::

    g(lambda) = sigma2 * N(x) / (D_T(x) * D_S(x))

with ``N`` the spectrum of ``(1 - theta B)(1 - Theta B^s)``,
``D_T = |1 - e^{-i lambda}|^4`` and ``D_S = |U(e^{-i lambda})|^2``. Partial
fractions give ``g = sigma2 * (c + A / D_T + B / D_S)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as cheb
from numpy.polynomial import polynomial as poly

from .series import AirlineParams, CanonicalDecomposition

GRID_SIZE = 2048
RECONSTRUCTION_RTOL = 1e-8
ADMISSIBLE_ATOL = 1e-10
GOLDEN_XTOL = 1e-10
# denominators below this are unit-root frequencies up to rounding
POLE_TOL = 1e-20


class DecompositionError(RuntimeError):
    """Internal consistency failure of the partial fraction split."""


class InadmissibleError(ValueError):
    """The canonical irregular variance is negative."""


def acgf(psi) -> np.ndarray:
    """Autocovariances ``g_0..g_q`` of the MA polynomial ``psi`` with unit innovation variance."""
    psi = np.asarray(psi, dtype=float)
    return np.array([psi[: len(psi) - k] @ psi[k:] for k in range(len(psi))])


def acgf_to_cheb(g) -> np.ndarray:
    a = np.array(g, dtype=float)
    a[1:] *= 2.0
    return a


def cheb_to_acgf(a) -> np.ndarray:
    g = np.array(a, dtype=float)
    g[1:] /= 2.0
    return g


def frequency_grid(size: int = GRID_SIZE) -> np.ndarray:
    return np.linspace(0.0, np.pi, size)


def _trend_denominator() -> np.ndarray:
    d = acgf_to_cheb([2.0, -1.0])  # |1 - e^{-i lambda}|^2
    return cheb.chebmul(d, d)


def _seasonal_denominator(s: int) -> np.ndarray:
    return acgf_to_cheb(acgf(np.ones(s)))


def trend_denominator_value(lam) -> np.ndarray:
    """|1 - e^{-i lambda}|^4, evaluated without cancellation."""
    return 16.0 * np.sin(0.5 * np.asarray(lam, dtype=float)) ** 4


def seasonal_denominator_value(lam, s: int) -> np.ndarray:
    """|1 + e^{-i lambda} + ... + e^{-i (s-1) lambda}|^2."""
    lam = np.asarray(lam, dtype=float)
    half = np.sin(0.5 * lam)
    out = np.full(lam.shape, float(s * s))
    nz = np.abs(half) > 1e-12
    np.divide(np.sin(0.5 * s * lam) ** 2, half ** 2, out=out, where=nz)
    return out


def _ratio(num, den_value, lam) -> np.ndarray:
    """num(cos lambda) / den_value with +inf where the denominator vanishes."""
    lam = np.asarray(lam, dtype=float)
    nv = cheb.chebval(np.cos(lam), num)
    out = np.full(lam.shape, np.inf)
    np.divide(nv, den_value, out=out, where=den_value > POLE_TOL)
    return out


def airline_pseudo_spectrum(p: AirlineParams, s: int):
    """Pseudo-spectrum of the airline model as a function of frequency.

    The returned callable maps ``lambda`` (scalar or array) to ``g(lambda)``,
    returning ``+inf`` at the unit-root frequencies ``2 pi k / s``.
    """
    num = p.sigma2 * acgf_to_cheb(acgf(p.ma_polynomial(s)))

    def g(lam):
        den = trend_denominator_value(lam) * seasonal_denominator_value(lam, s)
        return _ratio(num, den, lam)

    return g


@dataclass(frozen=True)
class SpectralSplit:
    """Partial fraction pieces, Chebyshev coefficients in ``x = cos(lambda)``.

    Trend spectrum ``trend_num / D_T``, seasonal spectrum
    ``seasonal_num / D_S`` and the constant ``remainder``, all already
    multiplied by ``sigma2``.
    """

    period: int
    trend_num: np.ndarray
    seasonal_num: np.ndarray
    remainder: float
    trend_den: np.ndarray
    seasonal_den: np.ndarray

    def trend(self, lam):
        return _ratio(self.trend_num, trend_denominator_value(lam), lam)

    def seasonal(self, lam):
        return _ratio(self.seasonal_num, seasonal_denominator_value(lam, self.period), lam)

    def total(self, lam):
        return self.trend(lam) + self.seasonal(lam) + self.remainder


def _pad(c, size):
    out = np.zeros(size)
    out[: len(c)] = c
    return out


def partial_fraction_split(p: AirlineParams, s: int, grid_size: int = GRID_SIZE) -> SpectralSplit:
    """Split the airline pseudo-spectrum into trend, seasonal and constant parts.

    Solves ``N = c D_T D_S + A D_S + B D_T`` exactly for ``c``, ``deg A <= 1``
    and ``deg B <= s - 2``, then checks the reconstruction on a frequency grid.
    """
    num = acgf_to_cheb(acgf(p.ma_polynomial(s)))
    dt = _trend_denominator()
    ds = _seasonal_denominator(s)
    size = s + 2
    cols = [_pad(cheb.chebmul(dt, ds), size)]
    for j in range(2):
        cols.append(_pad(cheb.chebmul(ds, np.eye(2)[j]), size))
    for j in range(s - 1):
        cols.append(_pad(cheb.chebmul(dt, np.eye(s - 1)[j]), size))
    sol = np.linalg.solve(np.column_stack(cols), _pad(num, size)) * p.sigma2
    split = SpectralSplit(s, sol[1:3], sol[3:], float(sol[0]), dt, ds)

    lam = frequency_grid(grid_size)
    g = airline_pseudo_spectrum(p, s)(lam)
    rebuilt = split.total(lam)
    ok = np.isfinite(g) & np.isfinite(rebuilt)
    err = np.max(np.abs(rebuilt[ok] - g[ok]) / np.abs(g[ok]))
    if not err <= RECONSTRUCTION_RTOL:
        raise DecompositionError(f"partial fraction reconstruction error {err:.3e}")
    return split


def golden_section(f, lo: float, hi: float, xtol: float = GOLDEN_XTOL):
    """Minimise a unimodal scalar function on ``[lo, hi]``; returns ``(x, f(x))``."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    candidates = [(f(lo), lo), (f(hi), hi), (f(0.5 * (a + b)), 0.5 * (a + b))]
    fx, x = min(candidates)
    return x, fx


def spectrum_minimum(spectrum, grid_size: int = GRID_SIZE):
    """Frequency and value of the minimum of a spectrum on ``[0, pi]``.

    Grid scan followed by golden-section refinement between the neighbours
    of the best grid point.
    """
    lam = frequency_grid(grid_size)
    vals = spectrum(lam)
    i = int(np.argmin(vals))
    lo = lam[max(i - 1, 0)]
    hi = lam[min(i + 1, grid_size - 1)]
    x, fx = golden_section(lambda t: float(spectrum(np.array([t]))[0]), lo, hi)
    if vals[i] < fx:
        return float(lam[i]), float(vals[i])
    return float(x), float(fx)


def _cheb_roots_on_interval(a, tol=1e-9):
    r = cheb.chebroots(a) if len(a) > 1 else np.array([])
    r = r[np.abs(r.imag) < tol].real
    return r[(r >= -1.0) & (r <= 1.0)]


def _zero_locations(a, tol):
    """Points of [-1, 1] where the nonnegative Chebyshev series ``a`` touches zero."""
    cand = np.concatenate([[-1.0, 1.0], _cheb_roots_on_interval(cheb.chebder(a))])
    vals = cheb.chebval(cand, a)
    return cand, vals


def spectral_factorize(g, atol: float = ADMISSIBLE_ATOL):
    """Factor a nonnegative autocovariance sequence into an invertible MA polynomial.

    Parameters
    ----------
    g : array_like
        Autocovariances ``g_0, ..., g_q`` of the target process.
    atol : float
        Tolerance (relative to the coefficient scale) below which a negative
        spectrum value is treated as rounding.

    Returns
    -------
    ma : ndarray
        ``(1, c_1, ..., c_q)``, ascending powers of B, all roots on or
        outside the unit circle.
    variance : float
        Innovation variance with ``variance * |ma(e^{-i lambda})|^2`` equal to
        the spectrum.
    """
    g = np.atleast_1d(np.asarray(g, dtype=float))
    q = len(g) - 1
    a = acgf_to_cheb(g)
    scale = float(np.sum(np.abs(a)))
    if scale == 0.0:
        return np.eye(1, q + 1)[0], 0.0
    if q == 0:
        if g[0] < -atol * max(scale, 1.0):
            raise ValueError(f"negative spectrum {g[0]:.3e}")
        return np.ones(1), max(float(g[0]), 0.0)

    cand, vals = _zero_locations(a, 1e-9)
    if np.min(vals) < -atol * scale:
        raise ValueError(f"spectrum is negative (minimum {np.min(vals):.3e})")

    factor = np.ones(1)
    # negligible top coefficients put roots at infinity; drop them
    rest = cheb.chebtrim(a, 1e-15 * scale)
    zero_tol = max(atol, 1e-9) * scale
    # deflate zeros on the unit circle; interior zeros of a nonnegative
    # cosine polynomial are double roots in x
    for _ in range(q):
        if len(rest) <= 1:
            break
        cand, vals = _zero_locations(rest, 1e-9)
        j = int(np.argmin(vals))
        if vals[j] > zero_tol:
            break
        x0 = cand[j]
        if x0 >= 1.0 - 1e-7 or x0 <= -1.0 + 1e-7:
            # divide by (1 - x) or (1 + x), both nonnegative on [-1, 1]
            sign = 1.0 if x0 > 0 else -1.0
            rest = cheb.chebdiv(rest, [1.0, -sign])[0]
            factor = poly.polymul(factor, [1.0, -sign])
        else:
            if len(rest) < 3:
                break
            rest = cheb.chebdiv(rest, cheb.chebmul([-x0, 1.0], [-x0, 1.0]))[0]
            factor = poly.polymul(factor, [1.0, -2.0 * x0, 1.0])

    if len(rest) > 1:
        xr = cheb.chebroots(rest).astype(complex)
        on_circle = np.abs(xr.imag) < 1e-9 * (1 + np.abs(xr.real))
        on_circle &= np.abs(xr.real) <= 1.0
        inner = np.sort(xr[on_circle].real)
        for k in range(0, len(inner) - 1, 2):
            factor = poly.polymul(factor, [1.0, -(inner[k] + inner[k + 1]), 1.0])
        if len(inner) % 2:
            sign = 1.0 if inner[-1] > 0 else -1.0
            factor = poly.polymul(factor, [1.0, -sign])
        for x in xr[~on_circle]:
            # the root of z + 1/z = 2x outside the circle, without cancellation
            r = np.sqrt(x * x - 1.0)
            z = x + r if abs(x + r) >= abs(x - r) else x - r
            factor = poly.polymul(factor, [1.0, -1.0 / z])
    ma = np.real(factor)
    ma = _pad(ma, q + 1)

    lam = np.linspace(0.0, np.pi, 64)
    target = cheb.chebval(np.cos(lam), a)
    fitted = np.abs(np.polyval(ma[::-1], np.exp(-1j * lam))) ** 2
    variance = float(target @ fitted / (fitted @ fitted))
    return ma, max(variance, 0.0)


def ma_spectrum(ma, variance, lam) -> np.ndarray:
    """``variance * |ma(e^{-i lambda})|^2``."""
    ma = np.asarray(ma, dtype=float)
    return variance * np.abs(np.polyval(ma[::-1], np.exp(-1j * np.asarray(lam)))) ** 2


def canonicalize(split: SpectralSplit, p: AirlineParams, s: int,
                 grid_size: int = GRID_SIZE) -> CanonicalDecomposition:
    """Move the minima of the trend and seasonal spectra into the irregular."""
    _, min_trend = spectrum_minimum(split.trend, grid_size)
    _, min_seas = spectrum_minimum(split.seasonal, grid_size)
    var_irregular = split.remainder + min_trend + min_seas

    trend_num = _pad(split.trend_num, len(split.trend_den)) - min_trend * split.trend_den
    seas_num = _pad(split.seasonal_num, len(split.seasonal_den)) - min_seas * split.seasonal_den
    trend_ma, var_trend = spectral_factorize(cheb_to_acgf(trend_num))
    seas_ma, var_seas = spectral_factorize(cheb_to_acgf(seas_num))

    admissible = var_irregular >= -ADMISSIBLE_ATOL
    if admissible:
        var_irregular = max(var_irregular, 0.0)
    return CanonicalDecomposition(
        period=s,
        seasonal_ma=seas_ma,
        trend_ma=trend_ma,
        var_seasonal=var_seas,
        var_trend=var_trend,
        var_irregular=float(var_irregular),
        admissible=bool(admissible),
        params=p,
    )


def decompose(p: AirlineParams, s: int, grid_size: int = GRID_SIZE) -> CanonicalDecomposition:
    """Canonical decomposition of the airline model ``p`` with period ``s``."""
    return canonicalize(partial_fraction_split(p, s, grid_size), p, s, grid_size)


def component_spectra(decomp: CanonicalDecomposition, lam):
    """Canonical trend, seasonal and irregular spectra on ``lam``."""
    lam = np.asarray(lam, dtype=float)
    dt = trend_denominator_value(lam)
    ds = seasonal_denominator_value(lam, decomp.period)
    trend = np.full(lam.shape, np.inf)
    seas = np.full(lam.shape, np.inf)
    np.divide(ma_spectrum(decomp.trend_ma, decomp.var_trend, lam), dt, out=trend, where=dt > POLE_TOL)
    np.divide(ma_spectrum(decomp.seasonal_ma, decomp.var_seasonal, lam), ds, out=seas, where=ds > POLE_TOL)
    return trend, seas, np.full(lam.shape, decomp.var_irregular)
