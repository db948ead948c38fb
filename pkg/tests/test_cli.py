import csv
import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from rseas.cli import EXIT_INPUT, InputError, main, read_series

SELECT_COLUMNS = [
    "Model", "Length", "df", "Sample", "Kurtosis", "Scaled", "Kurtosis", "LogLik",
    "AIC", "AICc", "BIC", "Seas", "Mean", "Abs", "Diff",
]


@pytest.fixture(scope="module")
def clean(data_dir):
    return str(data_dir / "airline_clean.csv")


@pytest.fixture(scope="module")
def dirty(data_dir):
    return str(data_dir / "airline_outliers.csv")


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, text, name="in.csv"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# --- input ------------------------------------------------------------------

def test_read_series_dates_and_comments():
    sf = read_series("# note\ndate,value\n2000-11,1.5\n2000-12,2\n2001-01,3\n")
    assert sf.period == 12 and sf.start == (2000, 11)
    assert_allclose(sf.values, [1.5, 2.0, 3.0])
    q = read_series("value,date\n1,2001Q4\n2,2002-Q1\n")
    assert q.period == 4 and q.dates == ["2001Q4", "2002-Q1"]
    assert read_series("value\n1\n2\n").period is None


@pytest.mark.parametrize("text, line", [
    ("date,value\n2000-01,1\n2000-02,x\n", 3),
    ("date,value\n2000-01,1\n2000-03,2\n", 3),
    ("date,value\n2000-01,1\n2000-02\n", 3),
    ("date,value\n2000-01,1\n2000-13,1\n", 3),
    ("date,value\n2000-01,nan\n", 2),
    ("# c\ndate,value\n2000-01,1\n2000-Q1,2\n", 4),
    ("date,val\n", 1),
])
def test_read_series_errors_name_line(text, line):
    with pytest.raises(InputError, match=f"line {line}"):
        read_series(text)


def test_malformed_row_exit_2(tmp_path, capsys):
    path = write(tmp_path, "date,value\n2000-01,1\n2000-02,1,2\n")
    code, _, err = run(["fit", "--input", path], capsys)
    assert code == EXIT_INPUT == 2
    assert "line 3" in err


def test_missing_file_and_missing_period(tmp_path, capsys):
    assert run(["fit", "--input", str(tmp_path / "nope.csv")], capsys)[0] == 2
    path = write(tmp_path, "value\n" + "\n".join(str(v) for v in range(40)) + "\n")
    code, _, err = run(["fit", "--input", path], capsys)
    assert code == 2 and "--period" in err


def test_period_mismatch(clean, capsys):
    code, _, err = run(["fit", "--input", clean, "--period", "4"], capsys)
    assert code == 2 and "contradicts" in err


def test_log_of_nonpositive_is_input_error(tmp_path, capsys):
    path = write(tmp_path, "value\n" + "\n".join(str(v) for v in range(-1, 40)) + "\n")
    assert run(["fit", "--input", path, "--period", "4", "--log"], capsys)[0] == 2


# --- fit --------------------------------------------------------------------

def test_fit_gaussian_smoke(clean, capsys):
    code, out, _ = run(["fit", "--input", clean], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["schema_version"] == 1 and rep["command"] == "fit"
    assert {"theta", "Theta", "sigma2"} == set(rep["params"])
    assert rep["period"] == 12 and rep["decomposition"]["admissible"]
    assert rep["loglik_mc_se"] == 0.0


def test_fit_t_deterministic(clean, tmp_path, capsys):
    outs = []
    for i in range(2):
        target = str(tmp_path / f"fit{i}.json")
        assert run(["fit", "--input", clean, "--model", "t", "--draws", "250", "--seed", "7",
                    "--out", target], capsys)[0] == 0
        outs.append(open(target, "rb").read())
    assert outs[0] == outs[1]
    rep = json.loads(outs[0])
    assert rep["heavy"]["irregular"] == "t" and rep["draws"] == 250
    assert rep["loglik_mc_se"] >= 0


def test_environment_defaults(clean, monkeypatch, capsys):
    monkeypatch.setenv("RSEAS_INPUT", clean)
    monkeypatch.setenv("RSEAS_LOG", "1")
    code, out, _ = run(["fit"], capsys)
    assert code == 0 and json.loads(out)["logged"] is True
    # flags override the environment
    monkeypatch.setenv("RSEAS_PERIOD", "4")
    code, _, err = run(["fit"], capsys)
    assert code == 2 and "contradicts" in err
    assert run(["fit", "--period", "12"], capsys)[0] == 0


# --- adjust -----------------------------------------------------------------

def test_adjust_columns_and_identity(clean, capsys):
    code, out, _ = run(["adjust", "--input", clean], capsys)
    assert code == 0
    rows = list(csv.reader(out.splitlines()))
    assert rows[0] == ["date", "value", "seasonal", "trend", "irregular", "adjusted"]
    body = np.array([[float(c) for c in r[1:]] for r in rows[1:]])
    assert len(body) == 150
    assert np.array_equal(body[:, 4], body[:, 0] - body[:, 1])
    assert_allclose(body[:, 1] + body[:, 2] + body[:, 3], body[:, 0], atol=1e-6)


def test_adjust_without_dates(tmp_path, capsys, clean):
    values = read_series(open(clean).read()).values
    path = write(tmp_path, "value\n" + "\n".join(repr(float(v)) for v in values) + "\n")
    code, out, _ = run(["adjust", "--input", path, "--period", "12"], capsys)
    assert code == 0 and out.splitlines()[0] == "value,seasonal,trend,irregular,adjusted"


def test_adjust_deterministic(clean, capsys):
    a = run(["adjust", "--input", clean, "--model", "t", "--draws", "50", "--seed", "3"], capsys)
    b = run(["adjust", "--input", clean, "--model", "t", "--draws", "50", "--seed", "3"], capsys)
    assert a[0] == 0 and a[1] == b[1]


# --- select -----------------------------------------------------------------

@pytest.fixture(scope="module")
def select_outputs(dirty):
    import contextlib
    import io

    out = {}
    for fmt in ("table", "json"):
        buf = io.StringIO()
        with contextlib.redirect_stdout(buf):
            code = main(["select", "--input", dirty, "--format", fmt, "--name", "Sim", "--withhold", "12"])
        out[fmt] = (code, buf.getvalue())
    return out


def test_select_table_golden(select_outputs):
    code, text = select_outputs["table"]
    assert code == 0
    lines = text.splitlines()
    assert lines[0].split() == SELECT_COLUMNS
    g, t = lines[1].split(), lines[2].split()
    assert g[:2] == ["Sim", "G"] and t[:2] == ["Sim", "T"]
    assert g[2] == t[2] == "150"
    # the t row carries the AIC marker on the outlier fixture
    aic_end = lines[0].index("AIC ") + 3
    assert lines[2][:aic_end].endswith("*") and not lines[1][:aic_end].endswith("*")
    assert lines[-1].startswith("recommendation: ")
    assert lines[-2].startswith("winners: aic=T")


def test_select_json_schema(select_outputs):
    code, text = select_outputs["json"]
    assert code == 0
    rep = json.loads(text)
    assert rep["schema_version"] == 1 and rep["withheld"] == 12
    assert [r["model"] for r in rep["rows"]] == ["G", "T"]
    assert set(rep["rows"][0]) == {
        "model", "length", "df", "loglik", "loglik_mc_se", "k", "aic", "aicc", "bic",
        "seas_mean_abs_diff", "seas_rms_diff", "params",
    }
    assert rep["rows"][1]["k"] == rep["rows"][0]["k"] + 1
    assert rep["rows"][1]["aic"] < rep["rows"][0]["aic"]
    assert set(rep["kurtosis"]) >= {"z_n", "scaled", "p_value", "reject_gaussian"}


@pytest.mark.parametrize("withhold", ["-1", "115"])
def test_select_withhold_out_of_range(clean, withhold, capsys):
    code, _, err = run(["select", "--input", clean, "--withhold", withhold], capsys)
    assert code == 2 and "withhold" in err


# --- outliers ---------------------------------------------------------------

def test_outliers_csv(dirty, capsys):
    code, out, _ = run(["outliers", "--input", dirty], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("critical value 3.5")
    assert lines[1] == "index,date,kind,coefficient,t_stat"
    found = {(int(r[0]), r[2]) for r in csv.reader(lines[2:])}
    assert {(14, "AO"), (95, "AO"), (112, "AO")} <= found


def test_outliers_json_and_critical(dirty, capsys):
    code, out, _ = run(["outliers", "--input", dirty, "--format", "json", "--critical", "100"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["outliers"] == [] and rep["critical_value"] == 100


def test_outliers_runaway_exit_3(tmp_path, capsys):
    rng = np.random.default_rng(0)
    y = np.cumsum(rng.standard_normal(60))
    y[rng.choice(np.arange(4, 56), 15, replace=False)] += 50
    path = write(tmp_path, "value\n" + "\n".join(repr(float(v)) for v in y) + "\n")
    assert run(["outliers", "--input", path, "--period", "4", "--critical", "3.0"], capsys)[0] == 3


# --- simulate ---------------------------------------------------------------

def test_simulate_kurtosis(capsys):
    code, out, _ = run(["simulate", "--experiment", "kurtosis", "--reps", "500", "--seed", "1"], capsys)
    assert code == 0
    rows = list(csv.reader(out.splitlines()))
    assert rows[0] == ["family", "kind", "key", "value"]
    assert {r[0] for r in rows[1:]} == {"gaussian", "t5", "t10", "t15"}
    assert out == run(["simulate", "--experiment", "kurtosis", "--reps", "500", "--seed", "1"], capsys)[1]


def test_simulate_aic(capsys):
    code, out, _ = run(["simulate", "--experiment", "aic", "--reps", "2", "--n", "60",
                        "--draws", "50", "--outliers", "3"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "replication,aic_gaussian_minus_t,choice"
    assert lines[-1].startswith("# fraction_t")


@pytest.mark.parametrize("args", [["--reps", "0"], ["--n", "3"], ["--experiment", "aic", "--n", "30"]])
def test_simulate_errors(args, capsys):
    argv = ["simulate"] + (["--experiment", "kurtosis"] if "--experiment" not in args else []) + args
    assert run(argv, capsys)[0] == 2
