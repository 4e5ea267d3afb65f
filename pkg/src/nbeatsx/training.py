"""Window sampling, input normalization, the MAE+penalty objective, the ADAM
training loop with early stopping, daily recalibration, ensembling, and seeded
random hyperparameter search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import tensor as T
from .data import (HOURS_PER_DAY, SeriesFrame, SplitSpec, select_early_stop_mask,
                   split_frame)
from .errors import ConfigError, DataValidationError, TrainingDivergedError
from .model import (ACTIVATIONS, ModelConfig, StackSpec, build_model,
                    forecast_single, network_forward, weight_names)
from .optim import AdamState, adam_step
from .tensor import Tensor

NORMALIZATION_SCHEMES = ("none", "median", "std", "invariant")
EARLY_STOP_MODES = ("random_weeks", "trailing_weeks")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 256
    learning_rate: float = 1e-3
    lr_decay: float = 0.5
    lr_decays: int = 3
    max_iterations: int = 30000
    eval_every: int = 100
    patience: int = 10
    stride: int = 24
    normalization: str = "median"
    lambda_coeff: float = 0.0     # L1 on block expansion coefficients
    lambda_weights: float = 0.0   # L2 on projection/conv weights
    early_stop_mode: str = "random_weeks"
    early_stop_weeks: int = 42
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.max_iterations < 1 or self.eval_every < 1 \
                or self.patience < 1 or self.stride < 1 or self.early_stop_weeks < 1:
            raise ConfigError("batch/iteration/patience/stride settings must be positive")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not (0 < self.lr_decay <= 1) or self.lr_decays < 0:
            raise ConfigError("invalid learning-rate decay settings")
        if self.normalization not in NORMALIZATION_SCHEMES:
            raise ConfigError(f"unknown normalization {self.normalization!r}")
        if self.early_stop_mode not in EARLY_STOP_MODES:
            raise ConfigError(f"unknown early-stop mode {self.early_stop_mode!r}")
        if self.lambda_coeff < 0 or self.lambda_weights < 0:
            raise ConfigError("penalty constants must be >= 0")


# ---------------------------------------------------------------------------
# windows


@dataclass(frozen=True)
class Window:
    start: int                 # hour index of the backcast start within its frame
    y_back: np.ndarray         # (L,)
    y_future: np.ndarray       # (H,)
    x: np.ndarray              # (L+H, n_x)
    origin: np.datetime64      # first forecast timestamp


def make_windows(frame: SeriesFrame, L: int, H: int, stride: int) -> list[Window]:
    """Rolling windows starting every ``stride`` hours."""
    total = L + H
    if len(frame) < total:
        raise DataValidationError(
            f"frame has {len(frame)} hours, a window needs {total}")
    windows = []
    for start in range(0, len(frame) - total + 1, stride):
        windows.append(Window(
            start=start,
            y_back=frame.target[start:start + L],
            y_future=frame.target[start + L:start + total],
            x=frame.covariates[start:start + total],
            origin=frame.timestamps[start + L],
        ))
    return windows


def stack_windows(windows: Sequence[Window]):
    y_back = np.stack([w.y_back for w in windows])
    y_future = np.stack([w.y_future for w in windows])
    x = np.stack([w.x for w in windows])
    return y_back, y_future, x


def partition_windows(windows: Sequence[Window], early_stop_mask: np.ndarray,
                      L: int, H: int) -> tuple[list[Window], list[Window]]:
    """Split windows into gradient and early-stop sets by forecast-span overlap.

    A window whose forecast span lies fully inside the mask is an early-stop
    window; one that does not touch the mask at all is a gradient window;
    straddlers are dropped from both so the held-out targets stay held out.
    """
    train, early = [], []
    for w in windows:
        span = early_stop_mask[w.start + L:w.start + L + H]
        if span.all():
            early.append(w)
        elif not span.any():
            train.append(w)
    return train, early


# ---------------------------------------------------------------------------
# normalization

_MAD_SCALE = 1.4826
_SCALE_FLOOR = 1e-8


@dataclass(frozen=True)
class NormalizationStats:
    """Per-column centers and scales for the target (column 0) and covariates."""

    scheme: str
    center: np.ndarray
    scale: np.ndarray

    @property
    def target_center(self) -> float:
        return float(self.center[0])

    @property
    def target_scale(self) -> float:
        return float(self.scale[0])

    @property
    def affine(self) -> bool:
        return self.scheme != "invariant"


def fit_normalization(frame: SeriesFrame, scheme: str) -> NormalizationStats:
    """Fit per-column stats. Call this on the training span only."""
    if scheme not in NORMALIZATION_SCHEMES:
        raise ConfigError(f"unknown normalization {scheme!r}")
    cols = np.concatenate([frame.target[:, None], frame.covariates], axis=1)
    if scheme == "none":
        return NormalizationStats("none", np.zeros(cols.shape[1]), np.ones(cols.shape[1]))
    if scheme == "std":
        center = cols.mean(axis=0)
        scale = cols.std(axis=0)  # population (1/n) convention
        if np.any(scale <= 0):
            bad = int(np.argmax(scale <= 0))
            name = "price" if bad == 0 else frame.cov_names[bad - 1]
            raise ConfigError(
                f"column {name!r} is constant; std normalization undefined, try 'median'")
        return NormalizationStats("std", center, scale)
    center = np.median(cols, axis=0)
    mad = np.median(np.abs(cols - center), axis=0)
    scale = np.maximum(_MAD_SCALE * mad, _SCALE_FLOOR)
    return NormalizationStats(scheme, center, scale)


def normalize_values(values: np.ndarray, stats: NormalizationStats,
                     column: int = 0) -> np.ndarray:
    z = (np.asarray(values, dtype=np.float64) - stats.center[column]) / stats.scale[column]
    return np.arcsinh(z) if stats.scheme == "invariant" else z


def denormalize_values(values: np.ndarray, stats: NormalizationStats,
                       column: int = 0) -> np.ndarray:
    z = np.asarray(values, dtype=np.float64)
    if stats.scheme == "invariant":
        z = np.sinh(z)
    return z * stats.scale[column] + stats.center[column]


def normalize_frame(frame: SeriesFrame, stats: NormalizationStats) -> SeriesFrame:
    target = normalize_values(frame.target, stats, 0)
    cov = np.empty_like(frame.covariates)
    for j in range(frame.n_x):
        cov[:, j] = normalize_values(frame.covariates[:, j], stats, j + 1)
    return SeriesFrame(frame.timestamps.copy(), target, frame.cov_names, cov)


def normalize_covariates(cov: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    out = np.empty_like(np.asarray(cov, dtype=np.float64))
    for j in range(out.shape[1]):
        out[:, j] = normalize_values(cov[:, j], stats, j + 1)
    return out


def stats_to_dict(stats: NormalizationStats) -> dict:
    return {"scheme": stats.scheme,
            "center": [float(v) for v in stats.center],
            "scale": [float(v) for v in stats.scale]}


def stats_from_dict(d: dict) -> NormalizationStats:
    return NormalizationStats(d["scheme"], np.asarray(d["center"], dtype=np.float64),
                              np.asarray(d["scale"], dtype=np.float64))


# ---------------------------------------------------------------------------
# objective


def loss_fn(tape, pred: Tensor, target: Tensor, coefficients: Sequence[Tensor],
            weights: Sequence[Tensor], lambda_coeff: float,
            lambda_weights: float) -> Tensor:
    """MAE plus an L1 penalty on expansion coefficients (averaged over the
    batch) and an L2 penalty on weight matrices (biases excluded)."""
    if pred.shape != target.shape:
        raise ConfigError(f"loss: pred shape {pred.shape} != target shape {target.shape}")
    total = T.tmean(tape, T.tabs(tape, T.sub(tape, pred, target)))
    if lambda_coeff > 0 and coefficients:
        batch = pred.shape[0] if pred.ndim > 1 else 1
        acc = None
        for theta in coefficients:
            s = T.tsum(tape, T.tabs(tape, theta))
            acc = s if acc is None else T.add(tape, acc, s)
        total = T.add(tape, total, T.hadamard(tape, acc, Tensor(lambda_coeff / batch)))
    if lambda_weights > 0 and weights:
        acc = None
        for w in weights:
            s = T.tsum(tape, T.hadamard(tape, w, w))
            acc = s if acc is None else T.add(tape, acc, s)
        total = T.add(tape, total, T.hadamard(tape, acc, Tensor(lambda_weights)))
    return total


class EarlyStopping:
    """Track the best validation value; signal a stop after ``patience``
    consecutive evaluations without strict improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.best_eval = 0
        self.bad = 0

    def update(self, value: float, eval_index: int) -> bool:
        if value < self.best:
            self.best = value
            self.best_eval = eval_index
            self.bad = 0
            return False
        self.bad += 1
        return self.bad >= self.patience


# ---------------------------------------------------------------------------
# training loop

_EVAL_CHUNK = 4096


def predict_windows(params, model_cfg: ModelConfig, windows: Sequence[Window]) -> np.ndarray:
    """Inference-mode forecasts for a window list, chunked for memory."""
    y_back, _, x = stack_windows(windows)
    outs = []
    for i in range(0, len(windows), _EVAL_CHUNK):
        out = network_forward(params, model_cfg, y_back[i:i + _EVAL_CHUNK],
                              x[i:i + _EVAL_CHUNK], tape=None)
        outs.append(out.forecast.data)
    return np.concatenate(outs, axis=0)


def windows_mae(params, model_cfg: ModelConfig, windows: Sequence[Window]) -> float:
    pred = predict_windows(params, model_cfg, windows)
    actual = np.stack([w.y_future for w in windows])
    return float(np.mean(np.abs(actual - pred)))


@dataclass
class TrainResult:
    params: dict[str, Tensor]
    curves: list[tuple[int, float, float]]  # (iteration, train_mae, earlystop_mae)
    best_iteration: int
    iterations_run: int
    stopped_early: bool


def train(params: dict[str, Tensor], model_cfg: ModelConfig,
          train_windows: Sequence[Window], early_stop_windows: Sequence[Window],
          cfg: TrainConfig) -> TrainResult:
    """ADAM over shuffled minibatches with periodic early-stop evaluation.

    The learning rate is halved at 25/50/75% of the iteration budget; training
    stops after ``patience`` evaluations without improvement and the
    best-observed parameters are restored.
    """
    if not train_windows or not early_stop_windows:
        raise DataValidationError("train: both window sets must be non-empty")
    y_back, y_future, x = stack_windows(train_windows)
    n = len(train_windows)
    rng = np.random.default_rng(cfg.seed)
    wnames = weight_names(params)

    state = AdamState.for_params(params)
    stopper = EarlyStopping(cfg.patience)
    curves: list[tuple[int, float, float]] = []
    best_snapshot = {k: t.data.copy() for k, t in params.items()}
    best_iteration = 0

    decay_points = {max(1, (cfg.max_iterations * k) // 4) for k in (1, 2, 3)} \
        if cfg.lr_decays == 3 else {
            max(1, (cfg.max_iterations * k) // (cfg.lr_decays + 1))
            for k in range(1, cfg.lr_decays + 1)}
    lr = cfg.learning_rate

    order = rng.permutation(n)
    cursor = 0
    iterations_run = 0
    stopped_early = False
    for it in range(1, cfg.max_iterations + 1):
        if it in decay_points:
            lr *= cfg.lr_decay
        if cursor + cfg.batch_size > n:
            order = rng.permutation(n)
            cursor = 0
        idx = order[cursor:cursor + cfg.batch_size] if n > cfg.batch_size else order
        cursor += cfg.batch_size

        tape = T.Tape()
        tape.register_parameters(params)
        out = network_forward(params, model_cfg, y_back[idx], x[idx],
                              tape=tape, training=True, rng=rng)
        loss = loss_fn(tape, out.forecast, Tensor(y_future[idx]), out.coefficients,
                       [params[k] for k in wnames], cfg.lambda_coeff, cfg.lambda_weights)
        value = float(loss.data)
        if not math.isfinite(value):
            raise TrainingDivergedError(
                f"non-finite loss {value} at iteration {it} (lr={lr:g})")
        grads = T.backward(tape, loss)
        adam_step(params, grads, state, lr)
        iterations_run = it

        if it % cfg.eval_every == 0:
            train_mae = windows_mae(params, model_cfg, train_windows)
            es_mae = windows_mae(params, model_cfg, early_stop_windows)
            curves.append((it, train_mae, es_mae))
            eval_index = it // cfg.eval_every
            if es_mae < stopper.best:
                best_snapshot = {k: t.data.copy() for k, t in params.items()}
                best_iteration = it
            if stopper.update(es_mae, eval_index):
                stopped_early = True
                break

    for k, t in params.items():
        t.data[...] = best_snapshot[k]
    return TrainResult(params, curves, best_iteration, iterations_run, stopped_early)


def write_curves_csv(path, curves) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("iteration,train_mae,earlystop_mae\n")
        for it, tr, es in curves:
            fh.write(f"{it},{repr(float(tr))},{repr(float(es))}\n")


# ---------------------------------------------------------------------------
# daily recalibration


@dataclass
class RecalibrationResult:
    origins: list[np.datetime64]      # 00:00 of each forecast day
    forecasts: np.ndarray             # (n_days, H) original units
    params: dict[str, Tensor]         # parameters after the last day
    last_curves: list[tuple[int, float, float]]


def _fit_history(frame_hist: SeriesFrame, model_cfg: ModelConfig, cfg: TrainConfig,
                 params: dict[str, Tensor]) -> tuple[NormalizationStats, TrainResult]:
    stats = fit_normalization(frame_hist, cfg.normalization)
    norm_hist = normalize_frame(frame_hist, stats)
    mask = select_early_stop_mask(norm_hist, cfg.early_stop_mode,
                                  cfg.early_stop_weeks, cfg.seed)
    windows = make_windows(norm_hist, model_cfg.L, model_cfg.H, cfg.stride)
    train_w, early_w = partition_windows(windows, mask, model_cfg.L, model_cfg.H)
    if not train_w or not early_w:
        raise DataValidationError(
            f"insufficient history: {len(train_w)} gradient and {len(early_w)} "
            f"early-stop windows")
    result = train(params, model_cfg, train_w, early_w, cfg)
    return stats, result


def recalibrate_daily(frame: SeriesFrame, model_cfg: ModelConfig, cfg: TrainConfig,
                      test_start, test_days: int, warm_start: bool = False
                      ) -> RecalibrationResult:
    """Retrain before each test day on all prior data and forecast its 24 hours.

    Day-ahead covariates for the forecast span are read from the frame (they
    are forecasts known at prediction time); target values at or after each
    day's origin are never touched.  ``warm_start`` initializes each day from
    the previous day's parameters instead of re-initializing.
    """
    start_idx = frame.index_of(np.datetime64(test_start, "h"))
    if frame.hour_of_day()[start_idx] != 0:
        raise DataValidationError(f"test start {test_start} is not at a day edge")
    if test_days < 1:
        raise DataValidationError("test_days must be >= 1")
    if start_idx + (test_days - 1) * HOURS_PER_DAY + model_cfg.H > len(frame):
        raise DataValidationError(
            f"frame ends before the last forecast span: need covariates through "
            f"{test_days - 1} days plus {model_cfg.H} hours past {test_start}")
    if start_idx < model_cfg.L + model_cfg.H:
        raise DataValidationError("insufficient history before the test start")

    params: Optional[dict[str, Tensor]] = None
    origins = []
    forecasts = np.empty((test_days, model_cfg.H))
    last_curves: list[tuple[int, float, float]] = []
    for day in range(test_days):
        origin = start_idx + day * HOURS_PER_DAY
        hist = frame.slice(0, origin)
        if params is None or not warm_start:
            params = build_model(model_cfg)
        stats, result = _fit_history(hist, model_cfg, cfg, params)
        last_curves = result.curves

        y_back = normalize_values(
            frame.target[origin - model_cfg.L:origin], stats, 0)
        x = normalize_covariates(
            frame.covariates[origin - model_cfg.L:origin + model_cfg.H], stats)
        pred_norm = forecast_single(params, model_cfg, y_back, x)
        forecasts[day] = denormalize_values(pred_norm, stats, 0)
        origins.append(frame.timestamps[origin])
    return RecalibrationResult(origins, forecasts, params, last_curves)


# ---------------------------------------------------------------------------
# ensembling

ENSEMBLE_VARIANTS = (
    (1, "random_weeks"),
    (1, "trailing_weeks"),
    (24, "random_weeks"),
    (24, "trailing_weeks"),
)


@dataclass
class EnsembleResult:
    origins: list[np.datetime64]
    forecasts: np.ndarray                     # arithmetic mean, (n_days, 24)
    member_forecasts: dict[str, np.ndarray]   # per variant


def ensemble(frame: SeriesFrame, model_cfg: ModelConfig, cfg: TrainConfig,
             test_start, test_days: int, warm_start: bool = False,
             variants=ENSEMBLE_VARIANTS, jobs: int = 1) -> EnsembleResult:
    """Train the stride x early-stop-mode member variants and average their
    recalibrated forecasts pointwise."""
    tasks = []
    for stride, mode in variants:
        member_cfg = replace(cfg, stride=stride, early_stop_mode=mode)
        tasks.append((f"stride{stride}_{mode}", member_cfg))
    results: dict[str, np.ndarray] = {}
    origins = None
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {
                name: pool.submit(_ensemble_member, frame, model_cfg, member_cfg,
                                  test_start, test_days, warm_start)
                for name, member_cfg in tasks}
            for name, fut in futures.items():
                try:
                    origins, results[name] = fut.result()
                except Exception as exc:
                    raise RuntimeError(f"ensemble member {name} failed: {exc}") from exc
    else:
        for name, member_cfg in tasks:
            try:
                origins, results[name] = _ensemble_member(
                    frame, model_cfg, member_cfg, test_start, test_days, warm_start)
            except Exception as exc:
                raise RuntimeError(f"ensemble member {name} failed: {exc}") from exc
    mean = np.mean(np.stack(list(results.values())), axis=0)
    return EnsembleResult(origins, mean, results)


def _ensemble_member(frame, model_cfg, member_cfg, test_start, test_days, warm_start):
    res = recalibrate_daily(frame, model_cfg, member_cfg, test_start, test_days,
                            warm_start=warm_start)
    return res.origins, res.forecasts


# ---------------------------------------------------------------------------
# random hyperparameter search


@dataclass(frozen=True)
class SearchSpace:
    """Sampling ranges mirroring the architecture/optimization/data grid."""

    architectures: tuple = (("identity", "tcn"), ("tcn", "identity"),
                            ("identity", "wavenet"), ("wavenet", "identity"),
                            ("trend", "seasonality", "exogenous"))
    activations: tuple = ACTIVATIONS
    hidden_range: tuple[int, int] = (50, 500)
    kernel_range: tuple[int, int] = (2, 10)
    channels: tuple = (8, 16, 32)
    n_pol_choices: tuple = (2, 3, 4)
    n_hr_choices: tuple = (1, 2)
    take_x_choices: tuple = (True, False)
    init_strategies: tuple = ("orthogonal", "he_norm", "glorot_norm")
    lr_range: tuple[float, float] = (5e-4, 1e-2)       # log-uniform
    batch_sizes: tuple = (256, 512)
    dropout_range: tuple[float, float] = (0.0, 1.0)
    lambda_coeff_range: tuple[float, float] = (0.0, 0.1)
    lambda_weight_range: tuple[float, float] = (1e-5, 1.0)  # log-uniform
    normalizations: tuple = NORMALIZATION_SCHEMES
    strides: tuple = (1, 24)
    early_stop_modes: tuple = EARLY_STOP_MODES
    batch_norm_choices: tuple = (False, True)
    seed_range: tuple[int, int] = (1, 1000)
    # loop-scale knobs (grid defaults; shrink for desk-scale searches)
    max_iterations: int = 30000
    eval_every: int = 100
    patience: int = 10
    early_stop_weeks: int = 42

    def sample(self, rng: np.random.Generator, L: int = 168, H: int = 24,
               n_x: int = 1) -> tuple[ModelConfig, TrainConfig]:
        kinds = self.architectures[rng.integers(len(self.architectures))]
        activation = self.activations[rng.integers(len(self.activations))]
        hidden = int(rng.integers(self.hidden_range[0], self.hidden_range[1] + 1))
        take_x = bool(self.take_x_choices[rng.integers(len(self.take_x_choices))])
        n_pol = int(self.n_pol_choices[rng.integers(len(self.n_pol_choices))])
        n_hr = int(self.n_hr_choices[rng.integers(len(self.n_hr_choices))])
        kernel = int(rng.integers(self.kernel_range[0], self.kernel_range[1] + 1))
        channels = int(self.channels[rng.integers(len(self.channels))])
        stacks = []
        for kind in kinds:
            if kind in ("tcn", "wavenet"):
                stacks.append(StackSpec(kind, activation=activation,
                                        kernel_size=kernel, channels=channels))
            else:
                stacks.append(StackSpec(
                    kind, hidden_units=hidden, activation=activation,
                    n_pol=n_pol if kind == "trend" else None,
                    n_hr=n_hr if kind == "seasonality" else None,
                    coefficients_take_x=take_x))
        model_cfg = ModelConfig(
            L=L, H=H, n_x=n_x, stacks=tuple(stacks),
            dropout_prob=float(rng.uniform(*self.dropout_range)) * 0.999,
            encoder_dropout=float(rng.uniform(*self.dropout_range)) * 0.999,
            init=self.init_strategies[rng.integers(len(self.init_strategies))],
            batch_norm=bool(self.batch_norm_choices[rng.integers(len(self.batch_norm_choices))]),
            seed=int(rng.integers(self.seed_range[0], self.seed_range[1] + 1)),
        )
        train_cfg = TrainConfig(
            batch_size=int(self.batch_sizes[rng.integers(len(self.batch_sizes))]),
            learning_rate=float(np.exp(rng.uniform(np.log(self.lr_range[0]),
                                                   np.log(self.lr_range[1])))),
            max_iterations=self.max_iterations,
            eval_every=self.eval_every,
            patience=self.patience,
            stride=int(self.strides[rng.integers(len(self.strides))]),
            normalization=self.normalizations[rng.integers(len(self.normalizations))],
            lambda_coeff=float(rng.uniform(*self.lambda_coeff_range)),
            lambda_weights=float(np.exp(rng.uniform(np.log(self.lambda_weight_range[0]),
                                                    np.log(self.lambda_weight_range[1])))),
            early_stop_mode=self.early_stop_modes[rng.integers(len(self.early_stop_modes))],
            early_stop_weeks=self.early_stop_weeks,
            seed=int(rng.integers(self.seed_range[0], self.seed_range[1] + 1)),
        )
        return model_cfg, train_cfg


@dataclass
class SearchTrial:
    val_mae: float
    model_cfg: ModelConfig
    train_cfg: TrainConfig


def validation_mae(frame: SeriesFrame, split: SplitSpec, model_cfg: ModelConfig,
                   cfg: TrainConfig) -> float:
    """Train on the training span, score day-ahead MAE over the validation span."""
    parts = split_frame(frame, split)
    hist = parts.train
    stats = fit_normalization(hist, cfg.normalization)
    norm_hist = normalize_frame(hist, stats)
    windows = make_windows(norm_hist, model_cfg.L, model_cfg.H, cfg.stride)
    train_w, early_w = partition_windows(windows, parts.early_stop_mask,
                                         model_cfg.L, model_cfg.H)
    params = build_model(model_cfg)
    train(params, model_cfg, train_w, early_w, cfg)

    # day-ahead evaluation windows across the validation year
    t_end = len(hist)
    v_end = t_end + len(parts.validation)
    preds, actuals = [], []
    for origin in range(t_end, v_end - model_cfg.H + 1, HOURS_PER_DAY):
        y_back = normalize_values(frame.target[origin - model_cfg.L:origin], stats, 0)
        x = normalize_covariates(
            frame.covariates[origin - model_cfg.L:origin + model_cfg.H], stats)
        pred = denormalize_values(forecast_single(params, model_cfg, y_back, x), stats, 0)
        preds.append(pred)
        actuals.append(frame.target[origin:origin + model_cfg.H])
    return float(np.mean(np.abs(np.asarray(actuals) - np.asarray(preds))))


def random_search(space: SearchSpace, budget: int, frame: SeriesFrame,
                  split: Optional[SplitSpec] = None, seed: int = 0,
                  L: int = 168, H: int = 24) -> list[SearchTrial]:
    """Uniform (log-uniform for lr and the L2 constant) sampling over the
    space; returns trials sorted by validation MAE ascending."""
    if budget < 1:
        raise ConfigError("search budget must be >= 1")
    if split is None:
        split = SplitSpec()
    rng = np.random.default_rng(seed)
    trials = []
    for _ in range(budget):
        model_cfg, train_cfg = space.sample(rng, L=L, H=H, n_x=frame.n_x)
        mae = validation_mae(frame, split, model_cfg, train_cfg)
        trials.append(SearchTrial(mae, model_cfg, train_cfg))
    trials.sort(key=lambda t: t.val_mae)
    return trials
