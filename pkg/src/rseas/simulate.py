"""Simulation generators and the Monte Carlo experiments built on them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import lfilter

from .series import AirlineParams, TimeSeries

KURTOSIS_FAMILIES = ("gaussian", 5.0, 10.0, 15.0)
QUANTILES = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def gen_airline(p: AirlineParams, s: int, n: int, seed=0, burn_in: Optional[int] = None) -> TimeSeries:
    """Simulate the airline model by integrating its MA(s+1) differences from zero.

    The first ``burn_in`` generated points (default ``2 s``) are discarded.
    """
    rng = _rng(seed)
    burn = 2 * s if burn_in is None else int(burn_in)
    total = n + burn
    e = rng.standard_normal(total + s + 1) * np.sqrt(p.sigma2)
    w = np.convolve(e, p.ma_polynomial(s))[s + 1: s + 1 + total]
    ar = np.zeros(s + 2)
    ar[[0, 1, s, s + 1]] = [1.0, -1.0, -1.0, 1.0]
    return TimeSeries(lfilter([1.0], ar, w)[burn:], s)


def inject_outliers(ts: TimeSeries, count: int, magnitude_in_sd: float, var_irregular: float,
                    seed=0):
    """Shift ``count`` distinct interior points by ``magnitude * sqrt(var_irregular)``, random sign.

    Indices are drawn uniformly away from the first and last period.
    Returns ``(series, sorted indices)``.
    """
    n, s = ts.n, ts.period
    if count < 0 or count >= n - 2 * s:
        raise ValueError(f"cannot place {count} outliers in the {n - 2 * s} interior points")
    if count == 0:
        return ts, np.zeros(0, dtype=int)
    rng = _rng(seed)
    idx = np.sort(rng.choice(np.arange(s, n - s), size=count, replace=False))
    signs = rng.choice([-1.0, 1.0], size=count)
    y = ts.values.copy()
    y[idx] += signs * magnitude_in_sd * np.sqrt(var_irregular)
    return ts.with_values(y), idx


@dataclass(frozen=True)
class SimpleNoiseModel:
    """White noise that is either Gaussian or t with a fixed variance."""

    family: str = "gaussian"
    variance: float = 1.0
    nu: Optional[float] = None

    def __post_init__(self):
        if self.family not in ("gaussian", "t"):
            raise ValueError(f"unknown family {self.family!r}")
        if not self.variance > 0:
            raise ValueError("variance must be positive")
        if self.family == "t" and not (self.nu is not None and self.nu > 2):
            raise ValueError("t noise needs nu > 2")

    @classmethod
    def from_label(cls, label, variance: float = 1.0) -> "SimpleNoiseModel":
        if label == "gaussian":
            return cls("gaussian", variance)
        return cls("t", variance, float(label))

    @property
    def label(self) -> str:
        return "gaussian" if self.family == "gaussian" else f"t{self.nu:g}"

    def sample(self, size, seed=0) -> np.ndarray:
        rng = _rng(seed)
        if self.family == "gaussian":
            return rng.standard_normal(size) * np.sqrt(self.variance)
        return rng.standard_t(self.nu, size) * np.sqrt(self.variance * (self.nu - 2) / self.nu)

    def limiting_kurtosis(self) -> float:
        if self.family == "gaussian":
            return 3.0
        return 3.0 * (self.nu - 2) / (self.nu - 4) if self.nu > 4 else np.inf


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings shared by the Monte Carlo experiments.

    Each replication draws from its own substream spawned from ``seed``, so
    results do not depend on the order in which replications run.
    """

    replications: int = 100
    n: int = 150
    period: int = 12
    params: AirlineParams = field(default_factory=lambda: AirlineParams(0.7, 0.7, 1.0))
    outlier_count: int = 0
    outlier_magnitude: float = 5.0
    seed: int = 0
    draws: int = 250

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.n < 4:
            raise ValueError("n must be at least 4")

    def streams(self):
        return np.random.SeedSequence(self.seed).spawn(self.replications)


@dataclass(frozen=True)
class KurtosisSummary:
    label: str
    statistics: np.ndarray
    quantiles: Dict[float, float]
    bin_edges: np.ndarray
    counts: np.ndarray

    @property
    def median(self) -> float:
        return self.quantiles[0.5]


def experiment_kurtosis(config: ExperimentConfig, families: Sequence = KURTOSIS_FAMILIES,
                        bins: int = 60, chunk: int = 10_000) -> Dict[str, KurtosisSummary]:
    """Sampling distribution of the kurtosis statistic for each noise family.

    Every family uses the same replication seeds. Histogram bins are shared
    across families and span the pooled 0.5%-99.5% range.
    """
    models = [SimpleNoiseModel.from_label(f) for f in families]
    children = np.random.SeedSequence(config.seed).spawn(len(models))
    stats = {}
    for model, child in zip(models, children):
        rng = np.random.default_rng(child)
        parts = []
        left = config.replications
        while left > 0:
            m = min(chunk, left)
            x = model.sample((m, config.n), rng)
            # kurtosis_statistic, vectorised over replications
            d = x - x.mean(axis=1, keepdims=True)
            m2 = np.mean(d * d, axis=1)
            parts.append(np.mean(d**4, axis=1) / m2**2)
            left -= m
        stats[model.label] = np.concatenate(parts)
    pooled = np.concatenate(list(stats.values()))
    edges = np.linspace(*np.quantile(pooled, [0.005, 0.995]), bins + 1)
    out = {}
    for label, z in stats.items():
        q = dict(zip(QUANTILES, np.quantile(z, QUANTILES)))
        counts, _ = np.histogram(z, edges)
        out[label] = KurtosisSummary(label, z, q, edges, counts)
    return out


@dataclass(frozen=True)
class AICRecord:
    """One replication of the AIC study."""

    series: TimeSeries
    outlier_indices: np.ndarray
    gaussian: "FitResult"
    student: "FitResult"

    @property
    def aic_difference(self) -> float:
        """Per-observation AIC of the Gaussian fit minus that of the t fit; positive favours t."""
        from .selection import information_criteria

        n = self.series.n
        return (information_criteria(self.gaussian.loglik, self.gaussian.n_params, n).aic
                - information_criteria(self.student.loglik, self.student.n_params, n).aic)


@dataclass(frozen=True)
class AICExperiment:
    records: Tuple[AICRecord, ...]
    failures: int
    outlier_count: int

    @property
    def differences(self) -> np.ndarray:
        return np.array([r.aic_difference for r in self.records])

    @property
    def fraction_t(self) -> float:
        d = self.differences
        return float(np.mean(d > 0)) if len(d) else np.nan

    @property
    def fraction_gaussian(self) -> float:
        d = self.differences
        return float(np.mean(d <= 0)) if len(d) else np.nan


def aic_replication(config: ExperimentConfig, stream) -> AICRecord:
    """One replication of the AIC study: simulate, contaminate, fit both models."""
    from .airline import fit_gaussian
    from .canonical import decompose
    from .heavy import fit_heavy

    rng = np.random.default_rng(stream)
    s = config.period
    ts = gen_airline(config.params, s, config.n, rng)
    # drawn before injection so a zero-magnitude arm reproduces the clean arm
    fit_seed = int(rng.integers(2**31))
    idx = np.zeros(0, dtype=int)
    if config.outlier_count:
        var_i = decompose(config.params, s).var_irregular
        ts, idx = inject_outliers(ts, config.outlier_count, config.outlier_magnitude, var_i, rng)
    g = fit_gaussian(ts)
    t = fit_heavy(ts, "t", M=config.draws, seed=fit_seed, start=g)
    return AICRecord(ts, idx, g, t)


def experiment_aic(config: ExperimentConfig) -> AICExperiment:
    """AIC choice between Gaussian and t fits over simulated airline series.

    Replications whose fits fail are dropped and counted in ``failures``.
    """
    from .airline import EstimationError
    from .canonical import DecompositionError, InadmissibleError

    records = []
    failures = 0
    for stream in config.streams():
        try:
            records.append(aic_replication(config, stream))
        except (EstimationError, InadmissibleError, DecompositionError, ArithmeticError, RuntimeError):
            failures += 1
    return AICExperiment(tuple(records), failures, config.outlier_count)


def kurtosis_table(summaries: Dict[str, KurtosisSummary]):
    """Long-format rows ``(family, kind, key, value)`` for CSV output."""
    rows = []
    for label, sm in summaries.items():
        for q, v in sm.quantiles.items():
            rows.append((label, "quantile", f"{q:g}", f"{v:.6f}"))
        for lo, hi, c in zip(sm.bin_edges[:-1], sm.bin_edges[1:], sm.counts):
            rows.append((label, "bin", f"{lo:.6f}:{hi:.6f}", str(int(c))))
    return rows
