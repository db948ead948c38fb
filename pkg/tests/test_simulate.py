import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from _studies import P77
from rseas import (
    ExperimentConfig,
    OptimizerSettings,
    SimpleNoiseModel,
    airline_difference,
    decompose,
    experiment_aic,
    experiment_kurtosis,
    fit_gaussian,
    gen_airline,
    inject_outliers,
)
from rseas.canonical import acgf
from rseas.simulate import aic_replication, kurtosis_table


def test_gen_airline_deterministic():
    a = gen_airline(P77, 12, 100, seed=4)
    b = gen_airline(P77, 12, 100, seed=4)
    assert_array_equal(a.values, b.values)
    assert a.n == 100 and a.period == 12
    assert not np.array_equal(a.values, gen_airline(P77, 12, 100, seed=5).values)


def test_gen_airline_burn_in():
    # with the same draws, burn-in only drops the leading points
    a = gen_airline(P77, 4, 50, seed=1, burn_in=0)
    b = gen_airline(P77, 4, 42, seed=1, burn_in=8)
    assert_allclose(b.values, a.values[8:])


@pytest.fixture(scope="module")
def long_difference():
    return airline_difference(gen_airline(P77, 12, 10**5, seed=99))


def test_difference_variance(long_difference):
    gamma0 = (1 + 0.7**2) * (1 + 0.7**2)
    assert gamma0 == pytest.approx(2.2201)
    assert np.var(long_difference) == pytest.approx(gamma0, rel=0.02)


def test_difference_lag1_autocovariance(long_difference):
    w = long_difference - long_difference.mean()
    n = len(w)
    c1 = np.mean(w[1:] * w[:-1])
    gamma1 = -0.7 * (1 + 0.7**2)
    # Bartlett: n var(c_1) = sum_k gamma_k^2 + gamma_{k+1} gamma_{k-1}
    g = acgf(P77.ma_polynomial(12))
    q = len(g) - 1

    def gam(k):
        return g[abs(k)] if abs(k) <= q else 0.0

    var = sum(gam(k) ** 2 + gam(k + 1) * gam(k - 1) for k in range(-q - 1, q + 2))
    assert abs(c1 - gamma1) < 3 * np.sqrt(var / n)


def test_inject_count_zero_identity(airline_series):
    ts, idx = inject_outliers(airline_series, 0, 5.0, 0.3, seed=1)
    assert ts is airline_series and len(idx) == 0


def test_inject_exact():
    var_i = decompose(P77, 12).var_irregular
    base = gen_airline(P77, 12, 150, seed=2)
    ts, idx = inject_outliers(base, 3, 5.0, var_i, seed=8)
    diff = ts.values - base.values
    changed = np.flatnonzero(diff)
    assert_array_equal(changed, idx)
    assert len(idx) == 3 and len(set(idx)) == 3
    assert np.all((idx >= 12) & (idx < 138))
    assert_allclose(np.abs(diff[idx]), 5 * np.sqrt(var_i), rtol=1e-12)
    again, idx2 = inject_outliers(base, 3, 5.0, var_i, seed=8)
    assert_array_equal(again.values, ts.values)
    assert_array_equal(idx, idx2)


@pytest.mark.parametrize("count", [-1, 126, 200])
def test_inject_too_many(count):
    with pytest.raises(ValueError):
        inject_outliers(gen_airline(P77, 12, 150, seed=2), count, 5.0, 1.0)


def test_noise_model_validation():
    with pytest.raises(ValueError):
        SimpleNoiseModel("cauchy")
    with pytest.raises(ValueError):
        SimpleNoiseModel("gaussian", variance=0.0)
    with pytest.raises(ValueError):
        SimpleNoiseModel("t", nu=2.0)
    assert SimpleNoiseModel.from_label(10.0).label == "t10"
    assert SimpleNoiseModel.from_label("gaussian").limiting_kurtosis() == 3.0
    assert SimpleNoiseModel("t", nu=10.0).limiting_kurtosis() == pytest.approx(4.0)
    assert SimpleNoiseModel("t", nu=3.0).limiting_kurtosis() == np.inf


@pytest.mark.parametrize("label", ["gaussian", 5.0, 15.0])
def test_noise_model_variance(label):
    x = SimpleNoiseModel.from_label(label, variance=2.0).sample(10**6, seed=3)
    assert np.var(x) == pytest.approx(2.0, rel=0.02)


def test_experiment_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(replications=0)
    with pytest.raises(ValueError):
        ExperimentConfig(n=3)
    streams = ExperimentConfig(replications=3, seed=1).streams()
    assert len({s.generate_state(1)[0] for s in streams}) == 3


@pytest.fixture(scope="module")
def kurtosis_summaries():
    return experiment_kurtosis(ExperimentConfig(replications=10**4, n=150, seed=21))


def test_kurtosis_experiment_medians(kurtosis_summaries):
    s = kurtosis_summaries
    assert 2.8 <= s["gaussian"].median <= 3.0
    assert s["gaussian"].median < s["t15"].median < s["t10"].median < s["t5"].median
    assert s["t5"].quantiles[0.75] > s["gaussian"].quantiles[0.99]


def test_kurtosis_experiment_histograms(kurtosis_summaries):
    edges = kurtosis_summaries["gaussian"].bin_edges
    for sm in kurtosis_summaries.values():
        assert_array_equal(sm.bin_edges, edges)
        assert sm.counts.sum() <= len(sm.statistics) == 10**4
    rows = kurtosis_table(kurtosis_summaries)
    assert {r[1] for r in rows} == {"quantile", "bin"}


def test_kurtosis_experiment_reproducible():
    cfg = ExperimentConfig(replications=200, n=50, seed=3)
    a, b = experiment_kurtosis(cfg), experiment_kurtosis(cfg)
    for k in a:
        assert_array_equal(a[k].statistics, b[k].statistics)
    c = experiment_kurtosis(cfg, chunk=7)
    assert_array_equal(a["t5"].statistics, c["t5"].statistics)


def test_magnitude_zero_arm_matches_clean():
    clean = ExperimentConfig(replications=2, n=60, period=4, params=P77, seed=5, draws=50)
    zero = ExperimentConfig(replications=2, n=60, period=4, params=P77, seed=5, draws=50,
                            outlier_count=3, outlier_magnitude=0.0)
    for s1, s2 in zip(clean.streams(), zero.streams()):
        a, b = aic_replication(clean, s1), aic_replication(zero, s2)
        assert_array_equal(a.series.values, b.series.values)
        assert a.aic_difference == b.aic_difference
        assert len(b.outlier_indices) == 3


def test_experiment_aic_reproducible():
    cfg = ExperimentConfig(replications=2, n=60, period=4, params=P77, seed=9, draws=50)
    a, b = experiment_aic(cfg), experiment_aic(cfg)
    assert_array_equal(a.differences, b.differences)
    assert len(a.records) + a.failures == 2
    assert a.fraction_t + a.fraction_gaussian == pytest.approx(1.0)


@pytest.mark.slow
def test_gaussian_mle_consistency():
    streams = np.random.SeedSequence(600).spawn(200)
    settings = OptimizerSettings(n_starts=1)
    fits = [fit_gaussian(gen_airline(P77, 12, 600, np.random.default_rng(s)), settings) for s in streams]
    est = np.array([[f.params.theta, f.params.Theta] for f in fits])
    assert abs(est[:, 0].mean() - 0.7) < 0.05
    assert abs(est[:, 1].mean() - 0.7) < 0.05
