import json

import numpy as np
import pytest

from nbeatsx.cli import main, read_forecast_csv
from nbeatsx.data import load_csv


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def synth_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "synth.csv"
    assert run_cli("synth", "--days", "120", "--seed", "7", "--out", str(path)) == 0
    return path


def base_config(tmp_path, data_csv, **overrides):
    cfg = {
        "data_csv": str(data_csv),
        "out_dir": str(tmp_path),
        "seed": 3,
        "preset": "interpretable",
        "L": 72,
        "H": 24,
        "hidden_units": 8,
        "activation": "selu",
        "batch_size": 64,
        "learning_rate": 2e-3,
        "max_iterations": 60,
        "eval_every": 20,
        "patience": 3,
        "stride": 24,
        "normalization": "median",
        "early_stop_mode": "trailing_weeks",
        "early_stop_weeks": 3,
        "test_start": "2018-04-21T00",
        "test_days": 1,
    }
    cfg.update(overrides)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return path


# ---------------------------------------------------------------------------
# synth


def test_synth_row_count_and_components(tmp_path):
    out = tmp_path / "d.csv"
    assert run_cli("synth", "--days", "60", "--seed", "5", "--out", str(out)) == 0
    frame = load_csv(out)
    assert len(frame) == 60 * 24
    comp = out.with_suffix(".components.csv")
    assert comp.exists()
    assert len(comp.read_text().strip().splitlines()) == 60 * 24 + 1


def test_synth_byte_identical_reruns(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    run_cli("synth", "--days", "61", "--seed", "9", "--out", str(a))
    run_cli("synth", "--days", "61", "--seed", "9", "--out", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_synth_below_minimum_days_exits_2(tmp_path):
    out = tmp_path / "d.csv"
    assert run_cli("synth", "--days", "10", "--out", str(out)) == 2


# ---------------------------------------------------------------------------
# config validation


def test_unknown_config_key_rejected(tmp_path, synth_csv):
    cfg = base_config(tmp_path, synth_csv)
    raw = json.loads(cfg.read_text())
    raw["not_a_key"] = 1
    cfg.write_text(json.dumps(raw))
    assert run_cli("train", "--config", str(cfg)) == 2


def test_wrong_type_rejected(tmp_path, synth_csv):
    cfg = base_config(tmp_path, synth_csv, hidden_units="fifty")
    assert run_cli("train", "--config", str(cfg)) == 2


# ---------------------------------------------------------------------------
# train / recalibrate / forecast / decompose


def test_train_writes_artifacts(tmp_path, synth_csv):
    cfg = base_config(tmp_path, synth_csv)
    assert run_cli("train", "--config", str(cfg)) == 0
    origins, fc = read_forecast_csv(tmp_path / "forecasts.csv")
    assert fc.shape == (1, 24)
    assert np.all(np.isfinite(fc))
    assert (tmp_path / "model.nbx").exists()
    curves = (tmp_path / "curves.csv").read_text().strip().splitlines()
    assert curves[0] == "iteration,train_mae,earlystop_mae"
    assert len(curves) > 1


def test_recalibrate_row_count_and_determinism(tmp_path, synth_csv):
    out1 = tmp_path / "r1"
    out2 = tmp_path / "r2"
    out1.mkdir(), out2.mkdir()
    cfg1 = base_config(out1, synth_csv, test_days=3, out_dir=str(out1))
    cfg2 = base_config(out2, synth_csv, test_days=3, out_dir=str(out2))
    assert run_cli("recalibrate", "--config", str(cfg1)) == 0
    assert run_cli("recalibrate", "--config", str(cfg2)) == 0
    f1 = (out1 / "forecasts.csv").read_bytes()
    f2 = (out2 / "forecasts.csv").read_bytes()
    assert f1 == f2
    origins, fc = read_forecast_csv(out1 / "forecasts.csv")
    assert fc.shape == (3, 24)


def test_forecast_from_container(tmp_path, synth_csv):
    cfg = base_config(tmp_path, synth_csv)
    assert run_cli("train", "--config", str(cfg)) == 0
    out = tmp_path / "fc.csv"
    assert run_cli("forecast", "--model", str(tmp_path / "model.nbx"),
                   "--data", str(synth_csv), "--origin", "2018-04-22T00",
                   "--out", str(out)) == 0
    origins, fc = read_forecast_csv(out)
    assert fc.shape == (1, 24)


def test_decompose_columns_and_additivity(tmp_path, synth_csv):
    cfg = base_config(tmp_path, synth_csv)
    assert run_cli("train", "--config", str(cfg)) == 0
    out = tmp_path / "dec.csv"
    assert run_cli("decompose", "--model", str(tmp_path / "model.nbx"),
                   "--data", str(synth_csv), "--origin", "2018-04-21T00",
                   "--out", str(out)) == 0
    lines = out.read_text().strip().splitlines()
    header = lines[0].split(",")
    assert header == ["timestamp", "actual", "level", "trend", "seasonality",
                      "exogenous", "forecast", "residual"]
    assert len(lines) == 25
    for ln in lines[1:]:
        vals = ln.split(",")
        actual, level, trend, seas, exog, fc, resid = map(float, vals[1:])
        assert abs((trend + seas + exog) - fc) < 1e-9
        assert resid == actual - fc


def test_decompose_rejects_generic_model(tmp_path, synth_csv):
    cfg = base_config(tmp_path, synth_csv, preset="generic", channels=4,
                      kernel_size=3, coefficients_take_x=False)
    assert run_cli("train", "--config", str(cfg)) == 0
    rc = run_cli("decompose", "--model", str(tmp_path / "model.nbx"),
                 "--data", str(synth_csv), "--out", str(tmp_path / "dec.csv"))
    assert rc == 2


def test_week_long_horizon_supported(tmp_path, synth_csv):
    cfg = base_config(tmp_path, synth_csv, L=168, H=168,
                      test_start="2018-04-14T00")
    assert run_cli("train", "--config", str(cfg)) == 0
    out = tmp_path / "dec.csv"
    assert run_cli("decompose", "--model", str(tmp_path / "model.nbx"),
                   "--data", str(synth_csv), "--origin", "2018-04-14T00",
                   "--out", str(out)) == 0
    assert len(out.read_text().strip().splitlines()) == 169


# ---------------------------------------------------------------------------
# ensemble


def test_ensemble_outputs_mean_of_members(tmp_path, synth_csv):
    cfg = base_config(tmp_path, synth_csv, stride=24)
    assert run_cli("ensemble", "--config", str(cfg)) == 0
    _, mean_fc = read_forecast_csv(tmp_path / "forecasts.csv")
    members = []
    for member in tmp_path.glob("forecasts_stride*.csv"):
        members.append(read_forecast_csv(member)[1])
    assert len(members) == 4
    assert np.allclose(np.mean(members, axis=0), mean_fc, atol=1e-12)


# ---------------------------------------------------------------------------
# evaluate / gwtest


def test_evaluate_perfect_forecast_zero_metrics(tmp_path, synth_csv):
    frame = load_csv(synth_csv)
    start = frame.index_of(np.datetime64("2018-04-21T00", "h"))
    from nbeatsx.cli import write_forecast_csv
    truth = frame.target[start:start + 48].reshape(2, 24)
    fc_path = tmp_path / "perfect.csv"
    write_forecast_csv(fc_path, [frame.timestamps[start + 24 * d] for d in range(2)], truth)
    out = tmp_path / "metrics.json"
    assert run_cli("evaluate", "--actuals", str(synth_csv),
                   "--forecasts", str(fc_path), "--out", str(out)) == 0
    rep = json.loads(out.read_text())
    assert rep["mae"] == 0.0 and rep["rmse"] == 0.0 and rep["smape"] == 0.0
    assert rep["rmae"] == 0.0
    assert rep["n_days"] == 2


def test_evaluate_misaligned_dates_exit_2(tmp_path, synth_csv):
    # origin past the end of the 120-day actuals frame
    from nbeatsx.cli import write_forecast_csv
    fc_path = tmp_path / "late.csv"
    write_forecast_csv(fc_path, [np.datetime64("2018-06-01T00", "h")],
                       np.zeros((1, 24)))
    rc = run_cli("evaluate", "--actuals", str(synth_csv),
                 "--forecasts", str(fc_path), "--out", str(tmp_path / "m.json"))
    assert rc == 2


def test_gwtest_identical_files_p_one(tmp_path, synth_csv):
    frame = load_csv(synth_csv)
    start = frame.index_of(np.datetime64("2018-03-01T00", "h"))
    from nbeatsx.cli import write_forecast_csv
    rng = np.random.default_rng(0)
    days = 20
    origins = [frame.timestamps[start + 24 * d] for d in range(days)]
    truth = frame.target[start:start + days * 24].reshape(days, 24)
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    write_forecast_csv(a, origins, truth + rng.normal(size=truth.shape))
    # identical forecasts under a different name
    import shutil
    shutil.copy(a, b)
    out = tmp_path / "gw.csv"
    assert run_cli("gwtest", "--actuals", str(synth_csv),
                   "--forecasts", str(a), str(b), "--out", str(out)) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "model,a,b"
    row_a = lines[1].split(",")
    assert float(row_a[2]) == 1.0  # identical forecasts


# ---------------------------------------------------------------------------
# search


def test_search_budget_rows(tmp_path, synth_csv):
    cfg = base_config(
        tmp_path, synth_csv, max_iterations=30, eval_every=10, patience=2,
        early_stop_weeks=2, split_train_days=80, split_val_days=20,
        split_test_days=20, L=72)
    assert run_cli("search", "--config", str(cfg), "--budget", "3") == 0
    lines = (tmp_path / "search_results.csv").read_text().strip().splitlines()
    assert len(lines) == 4
    first = lines[1].split(",")
    assert first[0] == "1"
    maes = [float(ln.split(",")[1]) for ln in lines[1:]]
    assert maes == sorted(maes)
