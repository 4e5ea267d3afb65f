"""Command-line surface: synth, train, recalibrate, ensemble, forecast,
decompose, evaluate, gwtest, search.

Exit codes: 0 success, 1 runtime failure, 2 usage/validation error.  All
outputs are CSV/JSON files; every command is deterministic given its config
file and root seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import evaluation as eval_mod
from . import model as model_mod
from . import training as train_mod
from .errors import ConfigError, DataValidationError
from .model import ModelConfig, StackSpec

# ---------------------------------------------------------------------------
# run configuration: a flat, typed key-value JSON document

_CONFIG_SCHEMA: dict[str, tuple] = {
    # data / orchestration
    "data_csv": (str, None),
    "out_dir": (str, "."),
    "seed": (int, 1),
    "test_start": (str, None),
    "test_days": (int, 1),
    "warm_start": (bool, False),
    # model
    "preset": (str, "interpretable"),
    "stacks": (list, None),
    "encoder": (str, "tcn"),
    "encoder_first": (bool, False),
    "L": (int, 168),
    "H": (int, 24),
    "hidden_units": (int, 50),
    "blocks": (int, 1),
    "activation": (str, "selu"),
    "n_pol": (int, 2),
    "n_hr": (int, 1),
    "kernel_size": (int, 3),
    "channels": (int, 16),
    "coefficients_take_x": (bool, True),
    "dropout": (float, 0.0),
    "encoder_dropout": (float, 0.0),
    "init": (str, "glorot_norm"),
    "batch_norm": (bool, False),
    # training
    "batch_size": (int, 256),
    "learning_rate": (float, 1e-3),
    "max_iterations": (int, 30000),
    "eval_every": (int, 100),
    "patience": (int, 10),
    "stride": (int, 24),
    "normalization": (str, "median"),
    "lambda_coeff": (float, 0.0),
    "lambda_weights": (float, 0.0),
    "early_stop_mode": (str, "random_weeks"),
    "early_stop_weeks": (int, 42),
    # search split (days)
    "split_train_days": (int, 3 * 365),
    "split_val_days": (int, 365),
    "split_test_days": (int, 2 * 365),
}

# seeds derived from the root seed by fixed offsets
_TRAIN_SEED_OFFSET = 1


def load_run_config(path) -> dict:
    """Parse and schema-validate a run config file; unknown keys are rejected."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    cfg = {}
    for key, value in raw.items():
        if key not in _CONFIG_SCHEMA:
            raise ConfigError(f"{path}: unknown config key {key!r}")
        want, _ = _CONFIG_SCHEMA[key]
        if want is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if want is int and isinstance(value, bool):
            raise ConfigError(f"{path}: key {key!r} must be {want.__name__}")
        if not isinstance(value, want) or (want is not bool and isinstance(value, bool)):
            raise ConfigError(f"{path}: key {key!r} must be {want.__name__}")
        cfg[key] = value
    for key, (_, default) in _CONFIG_SCHEMA.items():
        cfg.setdefault(key, default)
    return cfg


def _shared_stack(kind: str, cfg: dict) -> StackSpec:
    if kind in ("tcn", "wavenet"):
        return StackSpec(kind, blocks=cfg["blocks"], activation=cfg["activation"],
                         kernel_size=cfg["kernel_size"], channels=cfg["channels"])
    return StackSpec(kind, blocks=cfg["blocks"], hidden_units=cfg["hidden_units"],
                     activation=cfg["activation"],
                     n_pol=cfg["n_pol"] if kind == "trend" else None,
                     n_hr=cfg["n_hr"] if kind == "seasonality" else None,
                     coefficients_take_x=cfg["coefficients_take_x"])


def model_config_from_run(cfg: dict, n_x: int) -> ModelConfig:
    common = dict(L=cfg["L"], H=cfg["H"], n_x=n_x, dropout_prob=cfg["dropout"],
                  encoder_dropout=cfg["encoder_dropout"], init=cfg["init"],
                  batch_norm=cfg["batch_norm"], seed=cfg["seed"])
    if cfg["stacks"] is not None:
        stacks = tuple(_shared_stack(str(k), cfg) for k in cfg["stacks"])
        return ModelConfig(stacks=stacks, **common)
    if cfg["preset"] == "interpretable":
        return model_mod.interpretable_config(
            n_pol=cfg["n_pol"], n_hr=cfg["n_hr"], hidden=cfg["hidden_units"],
            blocks=cfg["blocks"], activation=cfg["activation"],
            coefficients_take_x=cfg["coefficients_take_x"],
            **common)
    if cfg["preset"] == "generic":
        return model_mod.generic_config(
            encoder=cfg["encoder"], hidden=cfg["hidden_units"], blocks=cfg["blocks"],
            channels=cfg["channels"], kernel_size=cfg["kernel_size"],
            activation=cfg["activation"], encoder_first=cfg["encoder_first"],
            coefficients_take_x=cfg["coefficients_take_x"],
            **common)
    raise ConfigError(f"unknown preset {cfg['preset']!r}")


def train_config_from_run(cfg: dict) -> train_mod.TrainConfig:
    return train_mod.TrainConfig(
        batch_size=cfg["batch_size"], learning_rate=cfg["learning_rate"],
        max_iterations=cfg["max_iterations"], eval_every=cfg["eval_every"],
        patience=cfg["patience"], stride=cfg["stride"],
        normalization=cfg["normalization"], lambda_coeff=cfg["lambda_coeff"],
        lambda_weights=cfg["lambda_weights"], early_stop_mode=cfg["early_stop_mode"],
        early_stop_weeks=cfg["early_stop_weeks"], seed=cfg["seed"] + _TRAIN_SEED_OFFSET)


def _load_frame(cfg: dict) -> data_mod.SeriesFrame:
    if not cfg["data_csv"]:
        raise ConfigError("config key 'data_csv' is required for this command")
    return data_mod.load_csv(cfg["data_csv"])


def _out_path(cfg: dict, name: str) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out / name


# ---------------------------------------------------------------------------
# forecast CSV surface: origin_date, h00..h23 (or h000.. for longer horizons)


def write_forecast_csv(path, origins, forecasts: np.ndarray) -> None:
    forecasts = np.atleast_2d(np.asarray(forecasts, dtype=np.float64))
    width = max(2, len(str(forecasts.shape[1] - 1)))
    header = "origin_date," + ",".join(f"h{h:0{width}d}" for h in range(forecasts.shape[1]))
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for origin, row in zip(origins, forecasts):
            day = str(np.datetime64(origin, "D"))
            fh.write(day + "," + ",".join(repr(float(v)) for v in row) + "\n")


def read_forecast_csv(path) -> tuple[list[np.datetime64], np.ndarray]:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("origin_date"):
        raise DataValidationError(f"{path}: not a forecast CSV")
    origins, rows = [], []
    for ln in lines[1:]:
        parts = ln.split(",")
        origins.append(np.datetime64(parts[0], "h"))
        rows.append([float(v) for v in parts[1:]])
    return origins, np.asarray(rows)


# ---------------------------------------------------------------------------
# commands


def _default_origin(frame, H: int) -> np.datetime64:
    idx = len(frame) - H
    if idx < 0:
        raise DataValidationError("frame shorter than one horizon")
    return frame.timestamps[idx]


def cmd_synth(args) -> int:
    frame, components = data_mod.synth_generate(args.days, args.seed)
    data_mod.write_csv(args.out, frame)
    comp_path = Path(args.out).with_suffix(".components.csv")
    data_mod.write_components_csv(comp_path, frame, components)
    print(f"wrote {args.out} ({len(frame)} rows) and {comp_path}")
    return 0


def _run_recalibration(cfg: dict, test_start, test_days: int):
    frame = _load_frame(cfg)
    model_cfg = model_config_from_run(cfg, frame.n_x)
    train_cfg = train_config_from_run(cfg)
    return frame, model_cfg, train_cfg, train_mod.recalibrate_daily(
        frame, model_cfg, train_cfg, test_start, test_days,
        warm_start=cfg["warm_start"])


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    frame = _load_frame(cfg)
    model_cfg = model_config_from_run(cfg, frame.n_x)
    start = (np.datetime64(cfg["test_start"], "h") if cfg["test_start"]
             else _default_origin(frame, model_cfg.H))
    frame, model_cfg, train_cfg, res = _run_recalibration(
        {**cfg, "test_start": str(start)}, start, 1)
    stats = train_mod.fit_normalization(
        frame.slice(0, frame.index_of(res.origins[0])), train_cfg.normalization)
    model_mod.save_model(_out_path(cfg, "model.nbx"), model_cfg, res.params,
                         train_mod.stats_to_dict(stats))
    write_forecast_csv(_out_path(cfg, "forecasts.csv"), res.origins, res.forecasts)
    train_mod.write_curves_csv(_out_path(cfg, "curves.csv"), res.last_curves)
    print(f"trained through {res.origins[0]}; wrote model.nbx, forecasts.csv, curves.csv")
    return 0


def cmd_recalibrate(args) -> int:
    cfg = load_run_config(args.config)
    if not cfg["test_start"]:
        raise ConfigError("recalibrate requires config key 'test_start'")
    frame, model_cfg, train_cfg, res = _run_recalibration(
        cfg, np.datetime64(cfg["test_start"], "h"), cfg["test_days"])
    stats = train_mod.fit_normalization(
        frame.slice(0, frame.index_of(res.origins[-1])), train_cfg.normalization)
    model_mod.save_model(_out_path(cfg, "model.nbx"), model_cfg, res.params,
                         train_mod.stats_to_dict(stats))
    write_forecast_csv(_out_path(cfg, "forecasts.csv"), res.origins, res.forecasts)
    train_mod.write_curves_csv(_out_path(cfg, "curves.csv"), res.last_curves)
    print(f"recalibrated {cfg['test_days']} day(s) from {cfg['test_start']}")
    return 0


def cmd_ensemble(args) -> int:
    cfg = load_run_config(args.config)
    if not cfg["test_start"]:
        raise ConfigError("ensemble requires config key 'test_start'")
    frame = _load_frame(cfg)
    model_cfg = model_config_from_run(cfg, frame.n_x)
    train_cfg = train_config_from_run(cfg)
    res = train_mod.ensemble(frame, model_cfg, train_cfg,
                             np.datetime64(cfg["test_start"], "h"), cfg["test_days"],
                             warm_start=cfg["warm_start"], jobs=args.jobs)
    write_forecast_csv(_out_path(cfg, "forecasts.csv"), res.origins, res.forecasts)
    for name, member in res.member_forecasts.items():
        write_forecast_csv(_out_path(cfg, f"forecasts_{name}.csv"), res.origins, member)
    print(f"ensembled {len(res.member_forecasts)} members over {cfg['test_days']} day(s)")
    return 0


def cmd_forecast(args) -> int:
    model_cfg, params, norm = model_mod.load_model(args.model)
    if norm is None:
        raise ConfigError(f"{args.model}: container carries no normalization stats")
    stats = train_mod.stats_from_dict(norm)
    frame = data_mod.load_csv(args.data)
    origin_ts = (np.datetime64(args.origin, "h") if args.origin
                 else _default_origin(frame, model_cfg.H))
    origin = frame.index_of(origin_ts)
    if origin < model_cfg.L or origin + model_cfg.H > len(frame):
        raise DataValidationError(
            f"origin {origin_ts} leaves no room for a length-{model_cfg.L} lookback "
            f"and length-{model_cfg.H} covariate window")
    y_back = train_mod.normalize_values(
        frame.target[origin - model_cfg.L:origin], stats, 0)
    x = train_mod.normalize_covariates(
        frame.covariates[origin - model_cfg.L:origin + model_cfg.H], stats)
    pred = train_mod.denormalize_values(
        model_mod.forecast_single(params, model_cfg, y_back, x), stats, 0)
    write_forecast_csv(args.out, [origin_ts], pred[None, :])
    print(f"forecast from {origin_ts} written to {args.out}")
    return 0


_DECOMP_KINDS = ("trend", "seasonality", "exogenous")


def cmd_decompose(args) -> int:
    model_cfg, params, norm = model_mod.load_model(args.model)
    if not model_mod.is_interpretable(model_cfg):
        raise ConfigError("decomposition requires interpretable configuration")
    stats = train_mod.stats_from_dict(norm) if norm else None
    if stats is None or not stats.affine:
        raise ConfigError("decomposition requires an affine normalization scheme "
                          "(none, median, or std)")
    frame = data_mod.load_csv(args.data)
    origin_ts = (np.datetime64(args.origin, "h") if args.origin
                 else _default_origin(frame, model_cfg.H))
    origin = frame.index_of(origin_ts)
    if origin < model_cfg.L or origin + model_cfg.H > len(frame):
        raise DataValidationError("origin leaves no room for the lookback/forecast window")
    y_back = train_mod.normalize_values(
        frame.target[origin - model_cfg.L:origin], stats, 0)
    x = train_mod.normalize_covariates(
        frame.covariates[origin - model_cfg.L:origin + model_cfg.H], stats)
    actuals = frame.target[origin:origin + model_cfg.H]
    level = float(frame.target[origin - 1])
    decomp = model_mod.decompose_window(
        params, model_cfg, y_back, x, level,
        stats.target_center, stats.target_scale, actuals=actuals)

    columns = {k: np.zeros(model_cfg.H) for k in _DECOMP_KINDS}
    names = model_mod.stack_component_names(model_cfg)
    for name, spec in zip(names, model_cfg.stacks):
        columns[spec.kind] = columns[spec.kind] + decomp.components[name]
    with open(args.out, "w", newline="") as fh:
        fh.write("timestamp,actual,level,trend,seasonality,exogenous,forecast,residual\n")
        for h in range(model_cfg.H):
            ts = data_mod._format_ts(frame.timestamps[origin + h])
            fh.write(",".join([
                ts, repr(float(actuals[h])), repr(decomp.level),
                repr(float(columns["trend"][h])),
                repr(float(columns["seasonality"][h])),
                repr(float(columns["exogenous"][h])),
                repr(float(decomp.total[h])),
                repr(float(decomp.residual[h])),
            ]) + "\n")
    print(f"decomposition from {origin_ts} written to {args.out}")
    return 0


def _aligned_actuals(frame, origins, width: int) -> np.ndarray:
    rows = []
    for origin in origins:
        idx = frame.index_of(origin)
        if idx + width > len(frame):
            raise DataValidationError(
                f"actuals end before {origin} + {width} h: date ranges misaligned")
        rows.append(frame.target[idx:idx + width])
    return np.asarray(rows)


def cmd_evaluate(args) -> int:
    frame = data_mod.load_csv(args.actuals)
    origins, forecasts = read_forecast_csv(args.forecasts)
    actuals = _aligned_actuals(frame, origins, forecasts.shape[1])
    naive = eval_mod.naive_forecast(frame, origins[0], len(origins))
    report = eval_mod.metrics(actuals, forecasts, naive)
    with open(args.out, "w") as fh:
        fh.write(report.to_json() + "\n")
    print(f"MAE {report.mae:.6g}  rMAE {report.rmae:.6g}  "
          f"sMAPE {report.smape:.6g}  RMSE {report.rmse:.6g}")
    return 0


def cmd_gwtest(args) -> int:
    frame = data_mod.load_csv(args.actuals)
    sets = {}
    origins_ref = None
    for path in args.forecasts:
        name = Path(path).stem
        origins, fc = read_forecast_csv(path)
        if origins_ref is None:
            origins_ref = origins
        elif [str(o) for o in origins] != [str(o) for o in origins_ref]:
            raise DataValidationError(
                f"{path}: forecast origins misaligned with {args.forecasts[0]}")
        sets[name] = fc
    actuals = _aligned_actuals(frame, origins_ref, next(iter(sets.values())).shape[1])
    names, pvals = eval_mod.gw_matrix(sets, actuals, lags=args.lags)
    eval_mod.write_gw_matrix_csv(args.out, names, pvals)
    print(f"pairwise p-value matrix for {len(names)} models written to {args.out}")
    return 0


def cmd_search(args) -> int:
    cfg = load_run_config(args.config)
    frame = _load_frame(cfg)
    space = train_mod.SearchSpace(
        max_iterations=cfg["max_iterations"], eval_every=cfg["eval_every"],
        patience=cfg["patience"], early_stop_weeks=cfg["early_stop_weeks"])
    split = data_mod.SplitSpec(
        train_days=cfg["split_train_days"], val_days=cfg["split_val_days"],
        test_days=cfg["split_test_days"], early_stop_mode=cfg["early_stop_mode"],
        early_stop_weeks=cfg["early_stop_weeks"], seed=cfg["seed"])
    trials = train_mod.random_search(space, args.budget, frame, split=split,
                                     seed=cfg["seed"], L=cfg["L"], H=cfg["H"])
    out = _out_path(cfg, "search_results.csv")
    with open(out, "w", newline="") as fh:
        fh.write("rank,val_mae,stacks,activation,hidden_units,learning_rate,"
                 "batch_size,stride,normalization,lambda_coeff,lambda_weights,"
                 "early_stop_mode,init,model_config\n")
        for rank, trial in enumerate(trials, start=1):
            kinds = "+".join(s.kind for s in trial.model_cfg.stacks)
            blob = json.dumps(model_mod.config_to_dict(trial.model_cfg))
            fh.write(",".join([
                str(rank), repr(trial.val_mae), kinds,
                trial.model_cfg.stacks[0].activation,
                str(trial.model_cfg.stacks[0].hidden_units),
                repr(trial.train_cfg.learning_rate),
                str(trial.train_cfg.batch_size),
                str(trial.train_cfg.stride),
                trial.train_cfg.normalization,
                repr(trial.train_cfg.lambda_coeff),
                repr(trial.train_cfg.lambda_weights),
                trial.train_cfg.early_stop_mode,
                trial.model_cfg.init,
                json.dumps(blob),
            ]) + "\n")
    print(f"evaluated {len(trials)} configurations; best val MAE "
          f"{trials[0].val_mae:.6g}; wrote {out}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nbeatsx",
        description="Basis-expansion forecasting pipeline with exogenous variables")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic hourly dataset")
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    for name, fn, helptext in [
            ("train", cmd_train, "train one model and forecast the next day"),
            ("recalibrate", cmd_recalibrate, "daily retrain-and-forecast over a test span")]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True)
        p.set_defaults(func=fn)

    p = sub.add_parser("ensemble", help="train the four diversity variants and average")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("forecast", help="forecast from a saved model container")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--origin", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("decompose", help="per-stack component decomposition CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--origin", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("evaluate", help="accuracy metrics JSON for a forecast file")
    p.add_argument("--actuals", required=True)
    p.add_argument("--forecasts", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gwtest", help="pairwise predictive-ability p-value matrix")
    p.add_argument("--actuals", required=True)
    p.add_argument("--forecasts", nargs="+", required=True)
    p.add_argument("--lags", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gwtest)

    p = sub.add_parser("search", help="seeded random hyperparameter search")
    p.add_argument("--config", required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_search)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DataValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
