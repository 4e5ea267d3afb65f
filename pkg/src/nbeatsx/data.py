"""Hourly series ingestion, chronological splits, calendar features, and the
synthetic electricity-price-like generator used by the test pipeline."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .errors import DataValidationError

HOURS_PER_WEEK = 168
HOURS_PER_DAY = 24


def _weekday(timestamps: np.ndarray) -> np.ndarray:
    """Day of week with Monday = 0 (1970-01-01 was a Thursday)."""
    days = timestamps.astype("datetime64[D]").astype(np.int64)
    return (days + 3) % 7


@dataclass(frozen=True)
class SeriesFrame:
    """Contiguous hourly series: target plus named covariate columns."""

    timestamps: np.ndarray           # datetime64[h], strictly increasing, hourly
    target: np.ndarray               # f64, same length
    cov_names: tuple[str, ...] = ()
    covariates: Optional[np.ndarray] = None  # (T, n_x) f64

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[h]")
        y = np.asarray(self.target, dtype=np.float64)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "target", y)
        if self.covariates is None:
            object.__setattr__(self, "covariates", np.zeros((len(ts), 0)))
        else:
            x = np.asarray(self.covariates, dtype=np.float64)
            if x.ndim != 2 or x.shape[0] != len(ts):
                raise DataValidationError(
                    f"covariates shape {x.shape} does not match {len(ts)} timestamps")
            object.__setattr__(self, "covariates", x)
        if len(self.cov_names) != self.covariates.shape[1]:
            raise DataValidationError("cov_names length does not match covariate columns")
        if len(ts) == 0:
            raise DataValidationError("empty frame")
        if len(y) != len(ts):
            raise DataValidationError("target length does not match timestamps")
        steps = np.diff(ts.astype(np.int64))
        if np.any(steps <= 0):
            row = int(np.argmax(steps <= 0)) + 1
            raise DataValidationError(f"timestamps not strictly increasing at row {row}")
        if np.any(steps != 1):
            row = int(np.argmax(steps != 1)) + 1
            raise DataValidationError(f"non-hourly cadence at row {row}")
        if not np.all(np.isfinite(y)) or not np.all(np.isfinite(self.covariates)):
            raise DataValidationError("frame contains non-finite values")

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def n_x(self) -> int:
        return self.covariates.shape[1]

    def slice(self, start: int, stop: int) -> "SeriesFrame":
        return SeriesFrame(self.timestamps[start:stop].copy(),
                           self.target[start:stop].copy(),
                           self.cov_names,
                           self.covariates[start:stop].copy())

    def index_of(self, ts) -> int:
        """Position of an hourly timestamp within the frame."""
        ts = np.datetime64(ts, "h")
        i = int((ts - self.timestamps[0]).astype(np.int64))
        if i < 0 or i >= len(self) or self.timestamps[i] != ts:
            raise DataValidationError(f"timestamp {ts} not covered by frame")
        return i

    def weekday(self) -> np.ndarray:
        return _weekday(self.timestamps)

    def hour_of_day(self) -> np.ndarray:
        return self.timestamps.astype(np.int64) % 24

    def with_target(self, target: np.ndarray) -> "SeriesFrame":
        return SeriesFrame(self.timestamps.copy(), np.asarray(target, dtype=np.float64),
                           self.cov_names, self.covariates.copy())


# ---------------------------------------------------------------------------
# CSV ingestion

_MAX_GAP = 3


def _parse_timestamp(text: str, row: int) -> np.datetime64:
    try:
        return np.datetime64(text.strip().replace(" ", "T"), "h")
    except ValueError:
        raise DataValidationError(f"malformed timestamp {text!r} at row {row}") from None


def load_csv(path) -> SeriesFrame:
    """Read an hourly CSV with header ``timestamp,price,<covariates...>``.

    DST artifacts are resolved on load: duplicated hours are averaged and gaps
    of up to three consecutive missing hours are linearly interpolated.  Longer
    gaps, malformed timestamps, and out-of-order rows raise with row numbers.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataValidationError(f"{path}: empty file") from None
        if len(header) < 2:
            raise DataValidationError(f"{path}: header must have timestamp and price columns")
        cov_names = tuple(h.strip() for h in header[2:])
        times: list[np.datetime64] = []
        values: list[list[float]] = []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataValidationError(
                    f"row {row_no}: expected {len(header)} fields, got {len(row)}")
            ts = _parse_timestamp(row[0], row_no)
            try:
                vals = [float(c) for c in row[1:]]
            except ValueError:
                raise DataValidationError(f"row {row_no}: non-numeric value") from None
            times.append(ts)
            values.append(vals)
    if not times:
        raise DataValidationError(f"{path}: no data rows")

    # average runs of duplicated hours (DST fall-back)
    dedup_times: list[np.datetime64] = []
    dedup_vals: list[np.ndarray] = []
    i = 0
    arr = np.asarray(values, dtype=np.float64)
    while i < len(times):
        j = i + 1
        while j < len(times) and times[j] == times[i]:
            j += 1
        dedup_times.append(times[i])
        dedup_vals.append(arr[i:j].mean(axis=0))
        i = j
    for k in range(1, len(dedup_times)):
        if dedup_times[k] < dedup_times[k - 1]:
            raise DataValidationError(
                f"timestamps out of order near row {k + 2} ({dedup_times[k]})")

    # fill short gaps (DST spring-forward and isolated holes)
    filled_times = [dedup_times[0]]
    filled_vals = [dedup_vals[0]]
    one_hour = np.timedelta64(1, "h")
    for k in range(1, len(dedup_times)):
        gap = int((dedup_times[k] - dedup_times[k - 1]) / one_hour) - 1
        if gap > _MAX_GAP:
            raise DataValidationError(
                f"gap of {gap} missing hours between {dedup_times[k - 1]} and {dedup_times[k]}")
        for g in range(1, gap + 1):
            w = g / (gap + 1)
            filled_times.append(dedup_times[k - 1] + g * one_hour)
            filled_vals.append((1.0 - w) * dedup_vals[k - 1] + w * dedup_vals[k])
        filled_times.append(dedup_times[k])
        filled_vals.append(dedup_vals[k])

    table = np.asarray(filled_vals)
    return SeriesFrame(np.asarray(filled_times, dtype="datetime64[h]"),
                       table[:, 0], cov_names, table[:, 1:])


def _format_ts(ts: np.datetime64) -> str:
    return str(np.datetime64(ts, "m")).replace(" ", "T")


def write_csv(path, frame: SeriesFrame) -> None:
    """Write the canonical CSV form (ISO-8601 minutes, shortest-round-trip floats)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "price", *frame.cov_names])
        for i in range(len(frame)):
            writer.writerow([_format_ts(frame.timestamps[i]),
                             repr(float(frame.target[i])),
                             *(repr(float(v)) for v in frame.covariates[i])])


# ---------------------------------------------------------------------------
# chronological splitting

DAYS_PER_YEAR = 365


@dataclass(frozen=True)
class SplitSpec:
    """Chronological split in whole days, plus the early-stop carve-out mode."""

    train_days: int = 3 * DAYS_PER_YEAR
    val_days: int = DAYS_PER_YEAR
    test_days: int = 2 * DAYS_PER_YEAR
    early_stop_mode: str = "random_weeks"   # or "trailing_weeks"
    early_stop_weeks: int = 42
    seed: int = 0


@dataclass(frozen=True)
class SplitResult:
    train: SeriesFrame
    validation: SeriesFrame
    test: SeriesFrame
    early_stop_mask: np.ndarray   # bool per hour of the train frame
    early_stop_weeks: tuple[tuple[int, int], ...]  # (start, stop) hour ranges in train


def monday_week_starts(frame: SeriesFrame) -> np.ndarray:
    """Hour indices of Monday-00:00 starts of complete 168 h weeks in the frame."""
    wd = frame.weekday()
    hod = frame.hour_of_day()
    starts = np.flatnonzero((wd == 0) & (hod == 0))
    return starts[starts + HOURS_PER_WEEK <= len(frame)]


def select_early_stop_mask(frame: SeriesFrame, mode: str, weeks: int,
                           seed: int) -> np.ndarray:
    """Mark the hours reserved for early stopping within a training frame.

    random_weeks draws disjoint Monday-aligned whole weeks; trailing_weeks
    reserves the final ``weeks * 168`` hours.
    """
    mask = np.zeros(len(frame), dtype=bool)
    if mode == "trailing_weeks":
        span = weeks * HOURS_PER_WEEK
        if span >= len(frame):
            raise DataValidationError(
                f"trailing early-stop span of {weeks} weeks exceeds frame length")
        mask[len(frame) - span:] = True
        return mask
    if mode == "random_weeks":
        starts = monday_week_starts(frame)
        if len(starts) < weeks:
            raise DataValidationError(
                f"only {len(starts)} whole weeks available, need {weeks}")
        rng = np.random.default_rng(seed)
        chosen = rng.choice(starts, size=weeks, replace=False)
        for s in chosen:
            mask[s:s + HOURS_PER_WEEK] = True
        return mask
    raise DataValidationError(f"unknown early-stop mode {mode!r}")


def split_frame(frame: SeriesFrame, spec: SplitSpec) -> SplitResult:
    """Chronological train/validation/test split with day-edge boundaries."""
    need = (spec.train_days + spec.val_days + spec.test_days) * HOURS_PER_DAY
    if len(frame) < need:
        raise DataValidationError(
            f"frame has {len(frame)} hours, split needs {need}")
    t_end = spec.train_days * HOURS_PER_DAY
    v_end = t_end + spec.val_days * HOURS_PER_DAY
    s_end = v_end + spec.test_days * HOURS_PER_DAY
    train = frame.slice(0, t_end)
    validation = frame.slice(t_end, v_end)
    test = frame.slice(v_end, s_end)
    mask = select_early_stop_mask(train, spec.early_stop_mode,
                                  spec.early_stop_weeks, spec.seed)
    edges = np.flatnonzero(np.diff(mask.astype(np.int8)))
    bounds = np.concatenate([[0] if mask[0] else [], edges + 1,
                             [len(mask)] if mask[-1] else []]).astype(int)
    weeks = tuple((int(bounds[i]), int(bounds[i + 1]))
                  for i in range(0, len(bounds) - 1, 2)) if mask.any() else ()
    return SplitResult(train, validation, test, mask, weeks)


# ---------------------------------------------------------------------------
# calendar covariates

DOW_NAMES = ("dow_mon", "dow_tue", "dow_wed", "dow_thu", "dow_fri", "dow_sat", "dow_sun")


def calendar_features(frame: SeriesFrame) -> SeriesFrame:
    """Append day-of-week one-hot columns and an hour-of-day index column."""
    wd = frame.weekday()
    onehot = np.zeros((len(frame), 7))
    onehot[np.arange(len(frame)), wd] = 1.0
    hour = frame.hour_of_day().astype(np.float64)[:, None]
    cov = np.concatenate([frame.covariates, onehot, hour], axis=1)
    names = frame.cov_names + DOW_NAMES + ("hour",)
    return SeriesFrame(frame.timestamps.copy(), frame.target.copy(), names, cov)


# ---------------------------------------------------------------------------
# synthetic generator

SYNTH_MIN_DAYS = 60
SYNTH_START = np.datetime64("2018-01-01T00", "h")  # a Monday


@dataclass(frozen=True)
class SynthParams:
    """Generator coefficients; defaults put roughly 40% of target variance in
    the exogenous term so with/without-covariate contrasts are decisive."""

    trend_amp: float = 6.0        # a: quadratic trend height over the full span
    season_amp: float = 3.0       # b: daily cycle amplitude
    exog_coef: float = 1.0        # c: load-to-price pass-through
    exog_weekend_coef: float = 0.5  # d: extra pass-through on weekends
    noise_std: float = 0.7        # sigma
    ar_phi: float = 0.9
    ar_std: float = 0.7
    load_daily_amp: float = 1.5
    load_weekend_shift: float = -1.0


def synth_generate(days: int, seed: int, params: SynthParams = SynthParams()
                   ) -> tuple[SeriesFrame, dict[str, np.ndarray]]:
    """Generate an hourly price series with a load covariate and return the
    frame plus each additive ground-truth component."""
    if days < SYNTH_MIN_DAYS:
        raise DataValidationError(f"synth_generate: need days >= {SYNTH_MIN_DAYS}, got {days}")
    n = days * HOURS_PER_DAY
    rng = np.random.default_rng(seed)
    timestamps = SYNTH_START + np.arange(n).astype("timedelta64[h]")
    hour = np.arange(n) % 24
    weekend = (_weekday(timestamps) >= 5).astype(np.float64)

    ar = lfilter([1.0], [1.0, -params.ar_phi], rng.normal(0.0, params.ar_std, size=n))
    load = (ar
            + params.load_daily_amp * np.sin(2.0 * np.pi * (hour + 6) / 24.0)
            + params.load_weekend_shift * weekend)

    t_norm = np.arange(n, dtype=np.float64) / n
    trend = params.trend_amp * t_norm ** 2
    seasonality = params.season_amp * np.sin(2.0 * np.pi * hour / 24.0)
    exogenous = params.exog_coef * load + params.exog_weekend_coef * load * weekend
    noise = params.noise_std * rng.normal(size=n)
    target = trend + seasonality + exogenous + noise

    frame = SeriesFrame(timestamps, target, ("load",), load[:, None])
    components = {"trend": trend, "seasonality": seasonality,
                  "exogenous": exogenous, "noise": noise}
    return frame, components


def write_components_csv(path, frame: SeriesFrame, components: dict[str, np.ndarray]) -> None:
    names = list(components)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", *names])
        for i in range(len(frame)):
            writer.writerow([_format_ts(frame.timestamps[i]),
                             *(repr(float(components[k][i])) for k in names)])
