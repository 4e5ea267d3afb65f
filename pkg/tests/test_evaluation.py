import math

import numpy as np
import pytest

from nbeatsx.data import SeriesFrame
from nbeatsx.errors import DataValidationError
from nbeatsx.evaluation import (GWResult, gw_matrix, gw_test, metrics,
                                naive_forecast, write_gw_matrix_csv)


# ---------------------------------------------------------------------------
# brute-force oracle: naive loops, no shared code with the implementation


def brute_force_metrics(actuals, forecasts, naive):
    n_days, n_hours = actuals.shape
    abs_sum = 0.0
    sq_sum = 0.0
    smape_sum = 0.0
    naive_sum = 0.0
    for d in range(n_days):
        for h in range(n_hours):
            err = actuals[d][h] - forecasts[d][h]
            abs_sum += abs(err)
            sq_sum += err * err
            denom = abs(actuals[d][h]) + abs(forecasts[d][h])
            if denom > 0:
                smape_sum += abs(err) / denom
            naive_sum += abs(actuals[d][h] - naive[d][h])
    count = n_days * n_hours
    return (abs_sum / count,
            abs_sum / naive_sum,
            200.0 * smape_sum / count,
            math.sqrt(sq_sum / count))


def test_metrics_match_brute_force_on_random_inputs():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n_days = int(rng.integers(2, 15))
        actuals = rng.normal(size=(n_days, 24)) * 10
        forecasts = actuals + rng.normal(size=(n_days, 24))
        naive = actuals + rng.normal(size=(n_days, 24)) * 2
        rep = metrics(actuals, forecasts, naive)
        mae, rmae, smape, rmse = brute_force_metrics(actuals, forecasts, naive)
        assert rep.mae == pytest.approx(mae, abs=1e-12)
        assert rep.rmae == pytest.approx(rmae, abs=1e-12)
        assert rep.smape == pytest.approx(smape, abs=1e-12)
        assert rep.rmse == pytest.approx(rmse, abs=1e-12)


def test_perfect_forecast_metrics():
    actuals = np.random.default_rng(1).normal(size=(4, 24))
    naive = actuals + 1.0
    rep = metrics(actuals, actuals.copy(), naive)
    assert rep.mae == 0.0 and rep.rmse == 0.0 and rep.smape == 0.0 and rep.rmae == 0.0


def test_metrics_hand_example():
    # single pseudo-day of two hours
    actuals = np.array([[1.0, 2.0]])
    forecasts = np.array([[2.0, 4.0]])
    naive = np.array([[0.0, 0.0]])
    rep = metrics(actuals, forecasts, naive)
    assert rep.mae == pytest.approx(1.5)
    assert rep.rmse == pytest.approx(math.sqrt(2.5))
    assert rep.smape == pytest.approx(200.0 * (1 / 3 + 1 / 3) / 2)
    assert rep.rmae == pytest.approx(3.0 / 3.0)


def test_forecast_equal_to_naive_gives_unit_rmae():
    rng = np.random.default_rng(2)
    actuals = rng.normal(size=(5, 24))
    naive = actuals + rng.normal(size=(5, 24))
    rep = metrics(actuals, naive.copy(), naive)
    assert rep.rmae == pytest.approx(1.0)


def test_zero_naive_error_rejected():
    actuals = np.ones((3, 24))
    with pytest.raises(DataValidationError):
        metrics(actuals, actuals + 1.0, actuals.copy())


def test_rmae_scale_invariance():
    rng = np.random.default_rng(3)
    actuals = rng.normal(size=(6, 24))
    forecasts = actuals + rng.normal(size=(6, 24))
    naive = actuals + rng.normal(size=(6, 24))
    base = metrics(actuals, forecasts, naive)
    scaled = metrics(3.7 * actuals, 3.7 * forecasts, 3.7 * naive)
    assert scaled.rmae == pytest.approx(base.rmae, rel=1e-12)
    assert scaled.mae == pytest.approx(3.7 * base.mae, rel=1e-12)
    assert scaled.rmse == pytest.approx(3.7 * base.rmse, rel=1e-12)


def test_smape_bound_attained_for_opposed_signs():
    actuals = np.full((2, 24), 5.0)
    forecasts = np.full((2, 24), -3.0)
    naive = np.zeros((2, 24))
    rep = metrics(actuals, forecasts, naive)
    assert rep.smape == pytest.approx(200.0)


def test_smape_zero_over_zero_contributes_nothing():
    actuals = np.array([[0.0, 1.0]])
    forecasts = np.array([[0.0, 2.0]])
    naive = np.array([[1.0, 0.0]])
    rep = metrics(actuals, forecasts, naive)
    assert rep.smape == pytest.approx(200.0 * (1 / 3) / 2)


def test_daily_abs_error_series():
    actuals = np.zeros((2, 24))
    forecasts = np.ones((2, 24)) * np.array([[1.0], [2.0]])
    naive = np.full((2, 24), 5.0)
    rep = metrics(actuals, forecasts, naive)
    assert np.allclose(rep.daily_abs_error, [24.0, 48.0])
    assert rep.n_days == 2


# ---------------------------------------------------------------------------
# naive similar-day benchmark


def weekday_fixture(n_days=21):
    # starts on a Monday; target value encodes the absolute hour index
    ts = np.datetime64("2018-01-01T00", "h") + np.arange(n_days * 24).astype("timedelta64[h]")
    return SeriesFrame(ts, np.arange(n_days * 24, dtype=np.float64))


def test_naive_rule_weekday_table():
    frame = weekday_fixture()
    # test week starts Monday 2018-01-15 (day index 14)
    out = naive_forecast(frame, "2018-01-15T00", 7)
    hours = np.arange(24)
    # Monday: same weekday previous week (lag 168)
    assert np.array_equal(out[0], (14 * 24 - 168) + hours)
    # Tuesday through Friday: previous day (lag 24)
    for d in range(1, 5):
        assert np.array_equal(out[d], ((14 + d) * 24 - 24) + hours)
    # Saturday and Sunday: lag 168
    for d in (5, 6):
        assert np.array_equal(out[d], ((14 + d) * 24 - 168) + hours)


def test_naive_wednesday_copies_tuesday():
    frame = weekday_fixture()
    out = naive_forecast(frame, "2018-01-17T00", 1)  # a Wednesday
    assert np.array_equal(out[0], frame.target[15 * 24:16 * 24])


def test_naive_constant_series_zero_error():
    ts = np.datetime64("2018-01-01T00", "h") + np.arange(21 * 24).astype("timedelta64[h]")
    frame = SeriesFrame(ts, np.full(21 * 24, 42.0))
    out = naive_forecast(frame, "2018-01-15T00", 7)
    actual = frame.target[14 * 24:21 * 24].reshape(7, 24)
    assert np.array_equal(out, actual)


def test_naive_insufficient_history():
    frame = weekday_fixture(8)
    with pytest.raises(DataValidationError):
        naive_forecast(frame, "2018-01-04T00", 1)


# ---------------------------------------------------------------------------
# predictive-ability test


def test_gw_identical_errors_degenerate():
    errors = np.random.default_rng(4).normal(size=(40, 24))
    res = gw_test(errors, errors.copy(), lags=1)
    assert res.p_value == 1.0
    assert res.statistic == 0.0
    assert res.favored is None


def test_gw_conditioning_labels():
    rng = np.random.default_rng(5)
    e_a = rng.normal(size=(60, 24))
    e_b = rng.normal(size=(60, 24))
    assert gw_test(e_a, e_b, lags=0).conditioning == "constant_only"
    assert gw_test(e_a, e_b, lags=1).conditioning == "constant_plus_lags(1)"
    assert gw_test(e_a, e_b, lags=0).dof == 1
    assert gw_test(e_a, e_b, lags=3).dof == 4


def test_gw_statistic_consistent_with_chi2_tail():
    from scipy import stats as ss
    rng = np.random.default_rng(6)
    e_a = rng.normal(size=(80, 24))
    e_b = rng.normal(size=(80, 24)) * 1.1
    res = gw_test(e_a, e_b, lags=1)
    assert res.p_value == pytest.approx(float(ss.chi2.sf(res.statistic, res.dof)))


def test_gw_lag_zero_equals_dm_style_t_statistic():
    # with constant-only conditioning the statistic reduces to
    # n * mean(delta)^2 / mean(delta^2): the squared DM-style t statistic
    rng = np.random.default_rng(7)
    e_a = rng.normal(size=(120, 24)) * 1.3
    e_b = rng.normal(size=(120, 24))
    delta = np.abs(e_a).sum(axis=1) - np.abs(e_b).sum(axis=1)
    expect = len(delta) * delta.mean() ** 2 / (delta ** 2).mean()
    res = gw_test(e_a, e_b, lags=0)
    assert res.statistic == pytest.approx(expect, rel=1e-10)


def test_gw_mean_delta_direction():
    rng = np.random.default_rng(8)
    noise = rng.normal(size=(50, 24))
    better = noise * 0.5
    worse = noise * 2.0
    res = gw_test(worse, better, lags=1)
    assert res.mean_delta > 0
    assert res.favored == "B"
    res2 = gw_test(better, worse, lags=1)
    assert res2.favored == "A"


def test_gw_requires_enough_days():
    e = np.zeros((11, 24))
    with pytest.raises(DataValidationError):
        gw_test(e, e, lags=1)


def test_gw_null_calibration_rejection_rate():
    rng = np.random.default_rng(9)
    rejections = 0
    trials = 300
    for _ in range(trials):
        e_a = rng.normal(size=(728, 24))
        e_b = rng.normal(size=(728, 24))
        if gw_test(e_a, e_b, lags=1).p_value < 0.05:
            rejections += 1
    rate = rejections / trials
    assert 0.02 <= rate <= 0.10


def test_gw_power_under_doubled_noise():
    rng = np.random.default_rng(10)
    hits = 0
    trials = 60
    for _ in range(trials):
        e_a = rng.normal(size=(728, 24))
        e_b = 2.0 * rng.normal(size=(728, 24))
        res = gw_test(e_a, e_b, lags=1)
        if res.p_value < 0.01 and res.favored == "A":
            hits += 1
    assert hits >= 0.95 * trials


# ---------------------------------------------------------------------------
# pairwise matrix


def test_gw_matrix_shape_and_diagonal():
    rng = np.random.default_rng(11)
    actuals = rng.normal(size=(40, 24))
    sets = {"a": actuals + rng.normal(size=(40, 24)),
            "b": actuals + rng.normal(size=(40, 24)),
            "c": actuals + rng.normal(size=(40, 24))}
    names, pvals = gw_matrix(sets, actuals)
    assert names == ["a", "b", "c"]
    assert pvals.shape == (3, 3)
    assert np.all(np.diag(pvals) == 1.0)


def test_gw_matrix_one_sided_antisymmetry():
    rng = np.random.default_rng(12)
    actuals = rng.normal(size=(60, 24))
    sets = {"good": actuals + 0.5 * rng.normal(size=(60, 24)),
            "bad": actuals + 2.0 * rng.normal(size=(60, 24))}
    names, pvals = gw_matrix(sets, actuals)
    i, j = names.index("good"), names.index("bad")
    # exactly one direction reports outperformance
    assert (pvals[i, j] == 1.0) != (pvals[j, i] == 1.0)
    assert pvals[j, i] < 0.05  # the good model outperforms the bad one


def test_gw_matrix_requires_two_sets():
    with pytest.raises(DataValidationError):
        gw_matrix({"only": np.zeros((40, 24))}, np.zeros((40, 24)))


def test_gw_matrix_csv(tmp_path):
    rng = np.random.default_rng(13)
    actuals = rng.normal(size=(40, 24))
    sets = {"m1": actuals + rng.normal(size=(40, 24)),
            "m2": actuals + rng.normal(size=(40, 24))}
    names, pvals = gw_matrix(sets, actuals)
    path = tmp_path / "gw.csv"
    write_gw_matrix_csv(path, names, pvals)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "model,m1,m2"
    assert len(lines) == 3
