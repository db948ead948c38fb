"""Choosing between Gaussian and heavy-tailed airline models.

Three kinds of evidence are combined: a large-sample kurtosis test on the
irregular estimated under the Gaussian model, per-observation information
criteria, and the stability of the seasonal factors when the final stretch
of data is withheld.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.stats import norm

from .airline import OptimizerSettings, fit_gaussian
from .canonical import InadmissibleError, decompose
from .series import ComponentEstimates, FitResult, TimeSeries
from .statespace import build_decomposition_ss, smooth

KURTOSIS_VARIANCE = 24.0
DEFAULT_K_OFFSET = 2


def kurtosis_statistic(x) -> float:
    """Fourth central sample moment over the squared second, both with 1/n."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) < 4:
        raise ValueError("kurtosis needs at least 4 observations")
    d = x - x.mean()
    m2 = np.mean(d * d)
    if not m2 > 1e-300:
        raise ValueError("kurtosis undefined for a sample with zero variance")
    return float(np.mean(d**4) / m2**2)


@dataclass(frozen=True)
class KurtosisResult:
    z_n: float
    scaled: float
    n: int
    p_value: float
    reject_gaussian: bool
    alpha: float

    @property
    def critical_value(self) -> float:
        return float(norm.ppf(1 - self.alpha) * np.sqrt(KURTOSIS_VARIANCE))


def kurtosis_test(x, alpha: float = 0.05) -> KurtosisResult:
    """One-sided test of ``sqrt(n) (Z_n - 3)`` against its N(0, 24) limit.

    Heavy tails push the statistic upward, so only the upper tail rejects.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    z = kurtosis_statistic(x)
    n = len(x)
    scaled = np.sqrt(n) * (z - 3.0)
    sd = np.sqrt(KURTOSIS_VARIANCE)
    p = float(norm.sf(scaled / sd))
    return KurtosisResult(z, float(scaled), n, p, bool(scaled > norm.ppf(1 - alpha) * sd), alpha)


@dataclass(frozen=True)
class CriteriaRow:
    """Information criteria divided by the number of observations; smaller is better."""

    loglik: float
    k: int
    n: int
    aic: float
    aicc: float
    bic: float


def information_criteria(loglik: float, k: int, n: int) -> CriteriaRow:
    if n <= k + 1:
        raise ValueError(f"AICc undefined for n = {n} <= k + 1 = {k + 1}")
    aic = (-2.0 * loglik + 2.0 * k) / n
    bic = (-2.0 * loglik + k * np.log(n)) / n
    aicc = aic + 2.0 * k * (k + 1) / (n * (n - k - 1))
    return CriteriaRow(float(loglik), int(k), int(n), float(aic), float(aicc), float(bic))


@dataclass(frozen=True)
class StabilityReport:
    mean_abs_diff: float
    rms_diff: float
    differences: np.ndarray


def stability_diff(seasonal_full, seasonal_heldout, s: int) -> StabilityReport:
    """Change in seasonal factors when ``s`` further observations are added.

    ``seasonal_heldout`` must be exactly ``s`` shorter; differences are taken
    over the common span.
    """
    full = np.asarray(seasonal_full, dtype=float)
    held = np.asarray(seasonal_heldout, dtype=float)
    if len(full) - len(held) != s:
        raise ValueError(
            f"held-out fit must have exactly {s} fewer points (got {len(full)} vs {len(held)})"
        )
    d = full[: len(held)] - held
    return StabilityReport(float(np.mean(np.abs(d))), float(np.sqrt(np.mean(d * d))), d)


@dataclass(frozen=True)
class ModelRow:
    label: str
    fit: FitResult
    criteria: CriteriaRow
    stability: Optional[StabilityReport] = None

    @property
    def df(self) -> Optional[float]:
        return self.fit.heavy.nu if self.fit.heavy.irregular == "t" else None


@dataclass(frozen=True)
class SelectionReport:
    length: int
    kurtosis: KurtosisResult
    rows: Tuple[ModelRow, ...]
    winners: Dict[str, str]
    recommendation: str
    withheld: Optional[int] = None
    notes: Tuple[str, ...] = field(default_factory=tuple)

    def row(self, label: str) -> ModelRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)


def gaussian_components(ts: TimeSeries, fit: FitResult) -> ComponentEstimates:
    decomp = decompose(fit.params, ts.period)
    if not decomp.admissible:
        raise InadmissibleError(
            f"Gaussian fit has inadmissible decomposition (irregular variance {decomp.var_irregular:.3g})"
        )
    return smooth(build_decomposition_ss(decomp, ts.period, ts.n), ts.values)


def _components(ts, fit, M, seed):
    if fit.heavy.is_gaussian:
        return gaussian_components(ts, fit)
    from .heavy import extract_components_heavy

    return extract_components_heavy(ts, fit, M, seed)


def _fit_pair(ts, settings, M, seed):
    from .heavy import fit_heavy

    g = fit_gaussian(ts, settings)
    t = fit_heavy(ts, "t", settings, M=M, seed=seed, start=g)
    return g, t


def vote(rows, kurtosis: KurtosisResult):
    """Per-criterion winners and the majority recommendation (ties go to Gaussian)."""
    winners = {}
    for name in ("aic", "aicc", "bic"):
        winners[name] = min(rows, key=lambda r: getattr(r.criteria, name)).label
    winners["kurtosis"] = rows[1].label if kurtosis.reject_gaussian else rows[0].label
    if all(r.stability is not None for r in rows):
        winners["stability"] = min(rows, key=lambda r: r.stability.mean_abs_diff).label
    counts = {r.label: 0 for r in rows}
    for w in winners.values():
        counts[w] += 1
    top = max(counts.values())
    # rows[0] is the Gaussian model; it wins ties
    rec = next(r.label for r in rows if counts[r.label] == top)
    return winners, rec


def select_model(ts: TimeSeries, settings: Optional[OptimizerSettings] = None, alpha: float = 0.05,
                 withhold: Optional[int] = None, M: int = 250, seed: int = 0,
                 k_offset: int = DEFAULT_K_OFFSET,
                 fits: Optional[Tuple[FitResult, FitResult]] = None) -> SelectionReport:
    """Fit Gaussian and t models and compare them.

    ``k`` in the criteria is the number of estimated parameters plus
    ``k_offset``. With ``withhold`` (default: one period when the series is
    long enough) both models are refitted without the final ``withhold``
    points and the seasonal factors are compared; ``withhold=0`` skips this.
    ``fits`` supplies already computed Gaussian and t fits of ``ts``.
    """
    s, n = ts.period, ts.n
    notes = []
    g, t = fits if fits is not None else _fit_pair(ts, settings, M, seed)
    comp_g = gaussian_components(ts, g)
    kurt = kurtosis_test(comp_g.irregular, alpha)
    if withhold is None and n - s >= 3 * s:
        withhold = s
    if withhold is not None and n - withhold < 3 * s:
        raise ValueError(f"cannot withhold {withhold} of {n} points: need 3*period = {3 * s} left")
    stab = {"G": None, "T": None}
    if withhold:
        head = ts.head(n - withhold)
        gh, th = _fit_pair(head, settings, M, seed)
        comp_t = _components(ts, t, M, seed)
        stab["G"] = stability_diff(comp_g.seasonal, gaussian_components(head, gh).seasonal, withhold)
        stab["T"] = stability_diff(comp_t.seasonal, _components(head, th, M, seed).seasonal, withhold)
    else:
        notes.append("series too short to withhold data; stability omitted")
    rows = tuple(
        ModelRow(label, fit, information_criteria(fit.loglik, fit.n_params + k_offset, n), stab[label])
        for label, fit in (("G", g), ("T", t))
    )
    winners, rec = vote(rows, kurt)
    return SelectionReport(n, kurt, rows, winners, rec, withhold or None, tuple(notes))


TABLE_COLUMNS = (
    "Model", "Length", "df", "Sample Kurtosis", "Scaled Kurtosis", "LogLik",
    "AIC", "AICc", "BIC", "Seas Mean Abs Diff",
)


def table_rows(report: SelectionReport, name: str = ""):
    """Rows of the comparison table as strings; ``*`` marks the best value per criterion."""
    out = []
    best = {c: min(report.rows, key=lambda r: getattr(r.criteria, c)).label for c in ("aic", "aicc", "bic")}
    stab_rows = [r for r in report.rows if r.stability is not None]
    best_stab = min(stab_rows, key=lambda r: r.stability.mean_abs_diff).label if stab_rows else None

    def mark(value, flag, fmt):
        return fmt.format(value) + ("*" if flag else "")

    for r in report.rows:
        out.append((
            f"{name} {r.label}".strip(),
            str(report.length),
            "" if r.df is None else f"{r.df:.2f}",
            f"{report.kurtosis.z_n:.1f}" if r.label == "G" else "",
            f"{report.kurtosis.scaled:.1f}" if r.label == "G" else "",
            f"{r.criteria.loglik:.2f}",
            mark(r.criteria.aic, best["aic"] == r.label, "{:.3f}"),
            mark(r.criteria.aicc, best["aicc"] == r.label, "{:.3f}"),
            mark(r.criteria.bic, best["bic"] == r.label, "{:.3f}"),
            "" if r.stability is None else mark(r.stability.mean_abs_diff, best_stab == r.label, "{:.4f}"),
        ))
    return out


def format_table(report: SelectionReport, name: str = "") -> str:
    """Fixed-width comparison table followed by the recommendation."""
    rows = [TABLE_COLUMNS] + table_rows(report, name)
    widths = [max(len(row[i]) for row in rows) for i in range(len(TABLE_COLUMNS))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in rows]
    k = report.kurtosis
    lines.append(
        f"kurtosis test: scaled = {k.scaled:.2f}, critical = {k.critical_value:.2f}, "
        f"p = {k.p_value:.3g}, reject Gaussian = {'yes' if k.reject_gaussian else 'no'}"
    )
    lines.append("winners: " + ", ".join(f"{c}={w}" for c, w in report.winners.items()))
    lines.append(f"recommendation: {report.recommendation}")
    return "\n".join(lines)
