"""Monte Carlo studies shared by several test modules, run once per session."""

from functools import lru_cache

import numpy as np

from rseas import AirlineParams, ExperimentConfig, decompose, detect_outliers, experiment_aic, gen_airline
from rseas.outliers import OutlierDetectionError

P77 = AirlineParams(0.7, 0.7, 1.0)
SEED_AIC = 2024
SEED_OUTLIERS = 31
OUTLIER_INDEX = 75


@lru_cache(maxsize=None)
def aic_study(outlier_count: int):
    """The two arms of the AIC study: 100 replications, n=150, M=250."""
    cfg = ExperimentConfig(replications=100, n=150, params=P77, outlier_count=outlier_count,
                           outlier_magnitude=5.0, seed=SEED_AIC + outlier_count, draws=250)
    return experiment_aic(cfg)


@lru_cache(maxsize=None)
def outlier_study(kind: str, replications: int = 100):
    """Detected ``(index, kind)`` sets for clean series or an 8 sigma_I AO/LS at t=75.

    A detection error is recorded as ``None``.
    """
    sd = np.sqrt(decompose(P77, 12).var_irregular)
    streams = np.random.SeedSequence(SEED_OUTLIERS).spawn(replications)
    out = []
    for stream in streams:
        ts = gen_airline(P77, 12, 150, np.random.default_rng(stream))
        y = ts.values.copy()
        if kind == "AO":
            y[OUTLIER_INDEX] += 8 * sd
        elif kind == "LS":
            y[OUTLIER_INDEX:] += 8 * sd
        try:
            found, _ = detect_outliers(ts.with_values(y), C=3.5)
            out.append(found.keys)
        except OutlierDetectionError:
            out.append(None)
    return out
