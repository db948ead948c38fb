import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.linalg import toeplitz

from rseas import (
    AirlineParams,
    Outlier,
    OutlierSet,
    TimeSeries,
    adjust_for_outliers,
    detect_outliers,
    gen_airline,
)
from rseas.cli import read_series
from rseas.outliers import (
    AO,
    LS,
    OutlierDetectionError,
    candidate_t_stats,
    default_critical_value,
    regressor,
)
from rseas.oracles import airline_autocovariances
from rseas.series import difference_values

from _studies import OUTLIER_INDEX, outlier_study


@pytest.fixture(scope="module")
def contaminated(data_dir):
    sf = read_series((data_dir / "airline_outliers.csv").read_text())
    return TimeSeries(sf.values, 12)


@pytest.fixture(scope="module")
def detected(contaminated):
    return detect_outliers(contaminated)


def test_regressors():
    assert_array_equal(regressor(AO, 2, 5), [0, 0, 1, 0, 0])
    assert_array_equal(regressor(LS, 2, 5), [0, 0, 1, 1, 1])
    with pytest.raises(ValueError):
        regressor("TC", 2, 5)


def test_default_critical_value():
    assert default_critical_value(150) == 3.5
    assert default_critical_value(200) == 3.5
    assert default_critical_value(201) == 4.0


def test_adjust_identity(contaminated):
    out = adjust_for_outliers(contaminated, OutlierSet())
    assert_array_equal(out.values, contaminated.values)


def test_adjust_single_ao(contaminated):
    out = adjust_for_outliers(contaminated, OutlierSet((Outlier(10, AO, 2.5, 9.0),)))
    diff = out.values - contaminated.values
    assert_allclose(diff[10], -2.5)
    assert np.count_nonzero(diff) == 1


def test_adjust_linear(contaminated):
    a = Outlier(10, AO, 2.5, 9.0)
    b = Outlier(40, LS, -1.5, 5.0)
    both = adjust_for_outliers(contaminated, OutlierSet((a, b))).values
    da = adjust_for_outliers(contaminated, OutlierSet((a,))).values - contaminated.values
    db = adjust_for_outliers(contaminated, OutlierSet((b,))).values - contaminated.values
    assert_allclose(both, contaminated.values + da + db, atol=1e-12)


def test_candidate_coefficients_match_dense_gls(contaminated):
    y = contaminated.values
    theta, Theta, s = 0.6, 0.5, 12
    cands, beta, _ = candidate_t_stats(theta, Theta, s, y)
    w = difference_values(y, s)
    Sinv = np.linalg.inv(toeplitz(airline_autocovariances(theta, Theta, 1.0, s, len(w))))
    for key in [(AO, 14), (AO, 95), (LS, 60), (AO, 0), (AO, 149), (LS, 1)]:
        i = cands.index(key)
        xd = difference_values(regressor(key[0], key[1], len(y)), s)
        ref = (xd @ Sinv @ w) / (xd @ Sinv @ xd)
        assert_allclose(beta[i], ref, rtol=1e-7)


def test_fixture_detections(detected):
    found, fit = detected
    keys = {(o.kind, o.index) for o in found}
    assert {(AO, 14), (AO, 95), (AO, 112)} <= keys
    assert fit.n_params == 3 + len(found)


def test_threshold_and_uniqueness(detected):
    found, _ = detected
    assert all(abs(o.t_stat) >= found.critical_value for o in found)
    assert len(found.keys) == len(found)
    assert [o.index for o in found] == sorted(o.index for o in found)


@pytest.mark.parametrize("c", [0.01, 250.0])
def test_scale_equivariance(contaminated, detected, c):
    scaled, _ = detect_outliers(contaminated.with_values(c * contaminated.values))
    assert scaled.keys == detected[0].keys


def test_adjusted_series_removes_spikes(contaminated, detected):
    adj = adjust_for_outliers(contaminated, detected[0])
    again, _ = detect_outliers(adj)
    assert not ({(14, AO), (95, AO), (112, AO)} & again.keys)


def test_runaway_detection_is_an_error():
    ts = gen_airline(AirlineParams(0.5, 0.5), 4, 60, seed=2)
    y = ts.values.copy()
    idx = np.random.default_rng(0).choice(np.arange(2, 58), 15, replace=False)
    y[idx] += 50.0
    with pytest.raises(OutlierDetectionError):
        detect_outliers(ts.with_values(y), C=3.0)


@pytest.mark.slow
def test_clean_series_false_positives():
    res = outlier_study("clean")
    empty = np.mean([r is not None and len(r) == 0 for r in res])
    assert empty >= 0.9, empty


@pytest.mark.slow
def test_additive_outlier_found():
    res = outlier_study("AO")
    hit = np.mean([r is not None and (OUTLIER_INDEX, AO) in r for r in res])
    assert hit >= 0.95, hit


@pytest.mark.slow
def test_level_shift_classified():
    res = outlier_study("LS", 50)
    ls = np.mean([r is not None and (OUTLIER_INDEX, LS) in r and (OUTLIER_INDEX, AO) not in r for r in res])
    assert ls > 0.5, ls
