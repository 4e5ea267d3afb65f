"""Point-forecast accuracy metrics, the similar-day naive benchmark, and the
conditional predictive-ability test for comparing forecast error streams."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats as sstats

from .data import HOURS_PER_DAY, SeriesFrame
from .errors import DataValidationError


@dataclass
class MetricsReport:
    mae: float
    rmae: float
    smape: float
    rmse: float
    n_days: int
    daily_abs_error: np.ndarray  # L1 norm of each day's 24 errors

    def to_dict(self) -> dict:
        return {"mae": self.mae, "rmae": self.rmae, "smape": self.smape,
                "rmse": self.rmse, "n_days": self.n_days,
                "daily_abs_error": [float(v) for v in self.daily_abs_error]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def metrics(actuals: np.ndarray, forecasts: np.ndarray,
            naive: np.ndarray) -> MetricsReport:
    """MAE, rMAE (relative to the naive benchmark), sMAPE, and RMSE over a
    days x hours error grid. sMAPE terms with |y| + |yhat| = 0 contribute 0."""
    actuals = np.asarray(actuals, dtype=np.float64)
    forecasts = np.asarray(forecasts, dtype=np.float64)
    naive = np.asarray(naive, dtype=np.float64)
    if actuals.shape != forecasts.shape or actuals.shape != naive.shape:
        raise DataValidationError(
            f"metrics: shapes differ: {actuals.shape} / {forecasts.shape} / {naive.shape}")
    if not np.all(np.isfinite(actuals)):
        raise DataValidationError("metrics: actuals contain non-finite values")
    err = actuals - forecasts
    abs_err = np.abs(err)
    naive_abs = np.abs(actuals - naive)
    naive_total = naive_abs.sum()
    if naive_total == 0:
        raise DataValidationError("metrics: naive benchmark has zero error, rMAE undefined")
    denom = np.abs(actuals) + np.abs(forecasts)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(denom > 0, abs_err / np.where(denom > 0, denom, 1.0), 0.0)
    return MetricsReport(
        mae=float(abs_err.mean()),
        rmae=float(abs_err.sum() / naive_total),
        smape=float(200.0 * terms.mean()),
        rmse=float(np.sqrt((err ** 2).mean())),
        n_days=actuals.shape[0],
        daily_abs_error=abs_err.sum(axis=1),
    )


def naive_forecast(frame: SeriesFrame, test_start, n_days: int) -> np.ndarray:
    """Similar-day rule: Mon/Sat/Sun copy the same weekday a week earlier
    (lag 168 h); Tue-Fri copy the previous day (lag 24 h)."""
    start = frame.index_of(np.datetime64(test_start, "h"))
    if frame.hour_of_day()[start] != 0:
        raise DataValidationError(f"naive_forecast: {test_start} is not a day edge")
    if start < 7 * HOURS_PER_DAY:
        raise DataValidationError("naive_forecast: need at least 7 days of history")
    if start + n_days * HOURS_PER_DAY > len(frame):
        raise DataValidationError("naive_forecast: test span exceeds frame")
    out = np.empty((n_days, HOURS_PER_DAY))
    weekdays = frame.weekday()
    for d in range(n_days):
        i = start + d * HOURS_PER_DAY
        lag = 7 * HOURS_PER_DAY if weekdays[i] in (0, 5, 6) else HOURS_PER_DAY
        out[d] = frame.target[i - lag:i - lag + HOURS_PER_DAY]
    return out


# ---------------------------------------------------------------------------
# Giacomini-White / Diebold-Mariano predictive-ability test


@dataclass
class GWResult:
    statistic: float
    dof: int
    p_value: float
    mean_delta: float      # mean daily L1-loss differential, A minus B
    conditioning: str      # "constant_only" (q=0) or "constant_plus_lags(q)"

    @property
    def favored(self) -> Optional[str]:
        """Which model the loss differential favors ('A', 'B', or None)."""
        if self.mean_delta > 0:
            return "B"
        if self.mean_delta < 0:
            return "A"
        return None


def gw_test(errors_a: np.ndarray, errors_b: np.ndarray, lags: int = 1) -> GWResult:
    """Equal-predictive-ability test on two days x hours error grids.

    The daily loss differential is the difference of daily L1 error norms.
    It is regressed (scaled by the instruments [1, lagged differentials]) on a
    constant-one response; n * R-squared from that artificial regression is the
    Wald-type statistic, asymptotically chi-squared with ``lags``+1 degrees of
    freedom under the null.  ``lags=0`` collapses the conditioning set to the
    constant and recovers the unconditional (Diebold-Mariano-style) test.
    """
    errors_a = np.asarray(errors_a, dtype=np.float64)
    errors_b = np.asarray(errors_b, dtype=np.float64)
    if errors_a.shape != errors_b.shape or errors_a.ndim != 2:
        raise DataValidationError(
            f"gw_test: error grids must share a 2D shape, got {errors_a.shape} "
            f"and {errors_b.shape}")
    if lags < 0:
        raise DataValidationError("gw_test: lags must be >= 0")
    n_days = errors_a.shape[0]
    if n_days <= lags + 10:
        raise DataValidationError(
            f"gw_test: need more than {lags + 10} days, got {n_days}")
    delta = np.abs(errors_a).sum(axis=1) - np.abs(errors_b).sum(axis=1)
    mean_delta = float(delta.mean())
    conditioning = "constant_only" if lags == 0 else f"constant_plus_lags({lags})"
    dof = lags + 1
    if np.all(delta == 0.0):
        return GWResult(0.0, dof, 1.0, 0.0, conditioning)

    if lags == 0:
        z = delta[:, None]
    else:
        rows = []
        for t in range(lags, n_days):
            rows.append([delta[t]] + [delta[t] * delta[t - j] for j in range(1, lags + 1)])
        z = np.asarray(rows)
    n = z.shape[0]
    ones = np.ones(n)
    beta, *_ = np.linalg.lstsq(z, ones, rcond=None)
    resid = ones - z @ beta
    r2 = 1.0 - float(np.mean(resid ** 2))
    statistic = n * r2
    p_value = float(sstats.chi2.sf(statistic, dof))
    return GWResult(float(statistic), dof, p_value, mean_delta, conditioning)


def gw_matrix(forecasts: dict[str, np.ndarray], actuals: np.ndarray,
              lags: int = 1) -> tuple[list[str], np.ndarray]:
    """Pairwise one-sided p-values: entry (i, j) is the p-value that model j
    outperforms model i; cells where the loss differential does not favor j
    (and the diagonal) report 1.0."""
    names = list(forecasts)
    if len(names) < 2:
        raise DataValidationError("gw_matrix: need at least two forecast sets")
    actuals = np.asarray(actuals, dtype=np.float64)
    errors = {k: actuals - np.asarray(v, dtype=np.float64) for k, v in forecasts.items()}
    k = len(names)
    pvals = np.ones((k, k))
    for i, row in enumerate(names):
        for j, col in enumerate(names):
            if i == j:
                continue
            res = gw_test(errors[row], errors[col], lags=lags)
            pvals[i, j] = res.p_value if res.favored == "B" else 1.0
    return names, pvals


def write_gw_matrix_csv(path, names: list[str], pvals: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("model," + ",".join(names) + "\n")
        for i, name in enumerate(names):
            fh.write(name + "," + ",".join(repr(float(v)) for v in pvals[i]) + "\n")
