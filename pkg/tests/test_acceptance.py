"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import contextlib
import io

import numpy as np
import pytest

from _studies import P77, aic_study, outlier_study
from rseas import (
    AirlineParams,
    ExperimentConfig,
    HeavyTailSpec,
    SimpleNoiseModel,
    airline_pseudo_spectrum,
    build_decomposition_ss,
    decompose,
    experiment_kurtosis,
    gen_airline,
    information_criteria,
    is_loglik,
    kalman_loglik,
    kurtosis_statistic,
)
from rseas.canonical import component_spectra, frequency_grid, spectrum_minimum
from rseas.cli import main
from rseas.oracles import differenced_loglik
from rseas.statespace import build_airline_ss
from rseas.selection import TABLE_COLUMNS

pytestmark = pytest.mark.acceptance

RESULTS = {}


def report(number: int, ok: bool, detail: str):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[number] = line
    print(line)
    assert ok, line


def test_criterion_1_information_criteria():
    g = information_criteria(236.75, 5, 155)
    t = information_criteria(243.05, 6, 155)
    got = [g.aic, g.bic, t.aic, t.bic]
    want = [-2.99, -2.89, -3.06, -2.94]
    ok = all(abs(a - b) <= 0.01 for a, b in zip(got, want))
    report(1, ok, "AIC/BIC " + " ".join(f"{a:.3f}" for a in got))


def _moment_vectors(reps, n, seed, chunk=500):
    rng = np.random.default_rng(seed)
    scaled, vecs = [], []
    for start in range(0, reps, chunk):
        x = rng.standard_normal((min(chunk, reps - start), n))
        m = np.stack([x.mean(1), (x**2).mean(1) - 1, (x**3).mean(1), (x**4).mean(1) - 3], axis=1)
        vecs.append(np.sqrt(n) * m)
        d = x - x.mean(1, keepdims=True)
        m2 = np.mean(d * d, 1)
        scaled.append(np.sqrt(n) * (np.mean(d**4, 1) / m2**2 - 3))
    return np.concatenate(scaled), np.concatenate(vecs)


def test_criterion_2_kurtosis_asymptotics():
    scaled, vecs = _moment_vectors(10**4, 5000, seed=2)
    cov = np.cov(vecs, rowvar=False)
    target = np.array([[1, 0, 3, 0], [0, 2, 0, 12], [3, 0, 15, 0], [0, 12, 0, 96]], dtype=float)
    diag_ok = np.all(np.abs(np.diag(cov) / np.diag(target) - 1) <= 0.10)
    off = ~np.eye(4, dtype=bool)
    off_ok = np.all(np.abs(cov[off] - target[off]) <= 0.5)
    mean, var = scaled.mean(), scaled.var()
    ok = abs(mean) < 0.3 and abs(var / 24 - 1) < 0.15 and diag_ok and off_ok
    worst_off = np.max(np.abs(cov[off] - target[off]))
    report(2, ok, f"mean {mean:.3f}, var {var:.2f}, cov diag {np.round(np.diag(cov), 2).tolist()}, "
                  f"max off-diagonal error {worst_off:.3f}")


def test_criterion_3_t_limit():
    out, ok = [], True
    for nu, child in zip((6.0, 10.0, 15.0), np.random.SeedSequence(3).spawn(3)):
        model = SimpleNoiseModel("t", 1.0, nu)
        z = kurtosis_statistic(model.sample(10**6, np.random.default_rng(child)))
        lim = model.limiting_kurtosis()
        ok &= abs(z / lim - 1) <= 0.025
        out.append(f"nu={nu:g}: {z:.3f} vs {lim:.3f}")
    report(3, bool(ok), "; ".join(out))


def test_criterion_4_kurtosis_ordering():
    s = experiment_kurtosis(ExperimentConfig(replications=10**4, n=150, seed=4))
    med = [s[k].median for k in ("gaussian", "t15", "t10", "t5")]
    ok = med[0] < med[1] < med[2] < med[3] and s["t5"].quantiles[0.25] > s["gaussian"].quantiles[0.75]
    report(4, ok, "medians G/t15/t10/t5 " + " ".join(f"{m:.3f}" for m in med)
           + f"; t5 q25 {s['t5'].quantiles[0.25]:.3f} vs G q75 {s['gaussian'].quantiles[0.75]:.3f}")


@pytest.mark.slow
def test_criterion_5_aic_choice():
    clean, dirty = aic_study(0), aic_study(3)
    ok = clean.fraction_gaussian > 0.6 and dirty.fraction_t > 0.7
    report(5, ok, f"clean arm Gaussian {clean.fraction_gaussian:.2f} ({clean.failures} failures); "
                  f"outlier arm t {dirty.fraction_t:.2f} ({dirty.failures} failures)")


def test_criterion_6_oracles():
    rng = np.random.default_rng(6)
    worst_ll = 0.0
    for i in range(20):
        s = (4, 12)[i % 2]
        theta, Theta = rng.uniform(-0.9, 0.9, 2)
        sigma2 = rng.uniform(0.5, 2.0)
        y = rng.standard_normal(24).cumsum()
        w = np.diff(y[s:] - y[:-s])
        expected = differenced_loglik(w, theta, Theta, sigma2, s)
        worst_ll = max(worst_ll, abs(kalman_loglik(build_airline_ss(theta, Theta, sigma2, s, 24), y) - expected))
        d = decompose(AirlineParams(theta, Theta, sigma2), s)
        if d.admissible:
            worst_ll = max(worst_ll, abs(kalman_loglik(build_decomposition_ss(d, s, 24), y) - expected))
    grid = frequency_grid(2048)
    worst_rec = worst_min = 0.0
    admissible = 0
    for theta, Theta in rng.uniform(-0.95, 0.95, size=(200, 2)):
        d = decompose(AirlineParams(theta, Theta), 12)
        if not d.admissible:
            continue
        admissible += 1
        trend, seas, irr = component_spectra(d, grid)
        g = airline_pseudo_spectrum(d.params, 12)(grid)
        tot = trend + seas + irr
        fin = np.isfinite(g) & np.isfinite(tot)
        worst_rec = max(worst_rec, np.max(np.abs(tot[fin] / g[fin] - 1)))
        for k in (0, 1):
            worst_min = max(worst_min, spectrum_minimum(lambda lam: component_spectra(d, lam)[k])[1])
    ok = worst_ll <= 1e-8 and worst_rec <= 1e-7 and worst_min <= 1e-8
    report(6, ok, f"max loglik error {worst_ll:.2e}; {admissible}/200 admissible, "
                  f"max reconstruction error {worst_rec:.2e}, max component minimum {worst_min:.2e}")


@pytest.mark.slow
def test_criterion_7_importance_sampling():
    d = decompose(P77, 12)
    m = build_decomposition_ss(d, 12, 150)
    hits, gaps, ses = 0, [], []
    for stream in np.random.SeedSequence(7).spawn(100):
        rng = np.random.default_rng(stream)
        ts = gen_airline(P77, 12, 150, rng)
        exact = kalman_loglik(m, ts.values)
        ll, se, _ = is_loglik(ts, d, HeavyTailSpec.student(200.0), M=250, seed=int(rng.integers(2**31)))
        gaps.append(abs(ll - exact))
        ses.append(se)
        hits += abs(ll - exact) < 3 * se
    report(7, hits >= 95, f"{hits}/100 within 3 mc_se; median |gap| {np.median(gaps):.4f}, "
                          f"median mc_se {np.median(ses):.4f}")


@pytest.mark.slow
def test_criterion_8_outlier_detector():
    clean = outlier_study("clean")
    ao = outlier_study("AO")
    fp_free = np.mean([r is not None and len(r) == 0 for r in clean])
    found = np.mean([r is not None and (75, "AO") in r for r in ao])
    report(8, fp_free >= 0.9 and found >= 0.95, f"clean false-positive-free {fp_free:.2f}; AO found {found:.2f}")


def test_criterion_9_select_format(data_dir):
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = main(["select", "--input", str(data_dir / "airline_outliers.csv"), "--name", "Sim"])
    lines = buf.getvalue().splitlines()
    header = lines[0].split()
    expected = " ".join(TABLE_COLUMNS).split()
    rows_ok = lines[1].split()[:3] == ["Sim", "G", "150"] and lines[2].split()[:3] == ["Sim", "T", "150"]
    tail_ok = lines[-1].startswith("recommendation: ") and lines[-3].startswith("kurtosis test:")
    ok = code == 0 and header == expected and rows_ok and tail_ok and len(lines) == 6
    report(9, ok, f"exit {code}; columns {' | '.join(TABLE_COLUMNS)}")
