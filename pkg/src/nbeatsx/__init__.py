"""Neural basis expansion forecasting with exogenous variables.

Interpretable (trend / seasonality / exogenous) and generic (identity plus
convolutional encoder) configurations on a self-contained f64 autodiff
substrate, with the training, recalibration, ensembling, and evaluation
pipeline used for day-ahead electricity price forecasting studies.
"""

from .basis import (BasisMatrix, exogenous_basis, harmonic_basis, identity_basis,
                    time_grid, trend_basis)
from .data import (SeriesFrame, SplitSpec, SynthParams, calendar_features,
                   load_csv, split_frame, synth_generate, write_csv)
from .errors import (ConfigError, DataValidationError, ShapeMismatchError,
                     TrainingDivergedError)
from .evaluation import GWResult, MetricsReport, gw_matrix, gw_test, metrics, naive_forecast
from .model import (ForecastDecomposition, ModelConfig, StackSpec, build_model,
                    decompose_window, forecast_single, generic_config,
                    interpretable_config, load_model, network_forward, save_model)
from .optim import AdamState, adam_step, init_weights
from .tensor import Tape, Tensor, backward, forward_op, grad_check
from .training import (EnsembleResult, NormalizationStats, RecalibrationResult,
                       SearchSpace, TrainConfig, TrainResult, Window, ensemble,
                       fit_normalization, loss_fn, make_windows, random_search,
                       recalibrate_daily, train)

__version__ = "0.1.0"
