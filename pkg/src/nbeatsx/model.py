"""Doubly-residual basis-expansion network with exogenous covariates.

A block is an FCNN plus two linear projection heads whose outputs are expanded
through the stack's basis (polynomial trend, harmonics, raw covariates, or
identity).  Encoder stacks replace the FCNN with a causal dilated convolution
stack over the covariates and project the last-step context vector through
learned backcast/forecast maps.  Blocks chain on the backcast residual; the
forecast is the sum of all stack forecasts.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from . import basis as basis_mod
from . import tensor as T
from .errors import ConfigError, ShapeMismatchError
from .optim import init_weights
from .tensor import Tensor

STACK_KINDS = ("trend", "seasonality", "exogenous", "identity", "tcn", "wavenet")
ENCODER_KINDS = ("tcn", "wavenet")
ACTIVATIONS = ("softplus", "selu", "prelu", "sigmoid", "relu", "tanh", "lrelu")

MODEL_MAGIC = b"NBXM"
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class StackSpec:
    kind: str
    blocks: int = 1
    fcnn_layers: int = 2
    hidden_units: int | tuple[int, ...] = 50
    activation: str = "selu"
    n_pol: Optional[int] = None        # trend only
    n_hr: Optional[int] = None         # seasonality only
    kernel_size: Optional[int] = None  # encoders only
    channels: Optional[int] = None     # encoders only
    dilations: Optional[tuple[int, ...]] = None  # encoders; None = doubled until covered
    coefficients_take_x: bool = False

    def __post_init__(self):
        if self.kind not in STACK_KINDS:
            raise ConfigError(f"unknown stack kind {self.kind!r}")
        if self.blocks < 1:
            raise ConfigError("blocks must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.kind == "trend" and (self.n_pol is None or self.n_pol < 0):
            raise ConfigError("trend stack requires n_pol >= 0")
        if self.kind == "seasonality" and (self.n_hr is None or self.n_hr < 1):
            raise ConfigError("seasonality stack requires n_hr >= 1")
        if self.kind in ENCODER_KINDS:
            if self.kernel_size is None or not (2 <= self.kernel_size <= 10):
                raise ConfigError("encoder stacks require kernel_size in [2, 10]")
            if self.channels is None or self.channels < 1:
                raise ConfigError("encoder stacks require channels >= 1")
        else:
            if self.kernel_size is not None or self.channels is not None:
                raise ConfigError(f"{self.kind} stack does not take encoder settings")

    def widths(self) -> tuple[int, ...]:
        if isinstance(self.hidden_units, int):
            return (self.hidden_units,) * self.fcnn_layers
        return tuple(self.hidden_units)


@dataclass(frozen=True)
class ModelConfig:
    L: int = 168
    H: int = 24
    n_x: int = 0
    stacks: tuple[StackSpec, ...] = ()
    dropout_prob: float = 0.0
    encoder_dropout: float = 0.0
    init: str = "glorot_norm"
    batch_norm: bool = False
    seed: int = 1

    def __post_init__(self):
        if not self.stacks:
            raise ConfigError("model needs at least one stack")
        if self.L < 1 or self.H < 1:
            raise ConfigError("L and H must be positive")
        if self.L < self.H:
            warnings.warn(f"input size L={self.L} below horizon H={self.H}", stacklevel=2)
        if not (0.0 <= self.dropout_prob < 1.0) or not (0.0 <= self.encoder_dropout < 1.0):
            raise ConfigError("dropout probabilities must lie in [0, 1)")
        for spec in self.stacks:
            if spec.kind == "exogenous" and self.n_x < 1:
                raise ConfigError("exogenous stack requires at least one covariate")
            if spec.kind in ENCODER_KINDS and self.n_x < 1:
                raise ConfigError(f"{spec.kind} stack requires at least one covariate")
        object.__setattr__(self, "stacks", tuple(self.stacks))


def interpretable_config(L=168, H=24, n_x=1, n_pol=2, n_hr=1, hidden=50, blocks=1,
                         activation="selu", coefficients_take_x=True, **kwargs) -> ModelConfig:
    """Trend + seasonality + exogenous stacks: the interpretable preset."""
    stacks = (
        StackSpec("trend", blocks=blocks, hidden_units=hidden, activation=activation,
                  n_pol=n_pol, coefficients_take_x=coefficients_take_x),
        StackSpec("seasonality", blocks=blocks, hidden_units=hidden, activation=activation,
                  n_hr=n_hr, coefficients_take_x=coefficients_take_x),
        StackSpec("exogenous", blocks=blocks, hidden_units=hidden, activation=activation,
                  coefficients_take_x=coefficients_take_x),
    )
    return ModelConfig(L=L, H=H, n_x=n_x, stacks=stacks, **kwargs)


def generic_config(L=168, H=24, n_x=1, encoder="tcn", hidden=50, blocks=1,
                   channels=16, kernel_size=3, activation="selu", encoder_first=False,
                   coefficients_take_x=False, **kwargs) -> ModelConfig:
    """Identity stack plus a convolutional encoder stack: the generic preset."""
    if encoder not in ENCODER_KINDS:
        raise ConfigError(f"encoder must be one of {ENCODER_KINDS}, got {encoder!r}")
    ident = StackSpec("identity", blocks=blocks, hidden_units=hidden,
                      activation=activation, coefficients_take_x=coefficients_take_x)
    enc = StackSpec(encoder, blocks=blocks, activation=activation,
                    kernel_size=kernel_size, channels=channels)
    stacks = (enc, ident) if encoder_first else (ident, enc)
    return ModelConfig(L=L, H=H, n_x=n_x, stacks=stacks, **kwargs)


# ---------------------------------------------------------------------------
# parameter construction


def _coeff_dims(spec: StackSpec, cfg: ModelConfig) -> tuple[int, int]:
    """(backcast, forecast) coefficient dimensions for a basis stack."""
    if spec.kind == "trend":
        n = spec.n_pol + 1
        return n, n
    if spec.kind == "seasonality":
        n = max(1, 2 * (cfg.H // 2 - 1) + 1)
        return n, n
    if spec.kind == "exogenous":
        return cfg.n_x, cfg.n_x
    if spec.kind == "identity":
        # a length-H coefficient vector cannot produce a length-L backcast, so
        # the backcast head gets its own identity basis of size L
        return cfg.L, cfg.H
    raise ConfigError(f"{spec.kind} is not a basis stack")


def encoder_dilations(spec: StackSpec, cfg: ModelConfig) -> tuple[int, ...]:
    """Dilations 1, 2, 4, ... doubled until the receptive field spans L+H."""
    window = cfg.L + cfg.H
    if spec.dilations is not None:
        rf = 1 + (spec.kernel_size - 1) * sum(spec.dilations)
        if rf < window:
            raise ConfigError(
                f"encoder receptive field {rf} cannot cover the {window} h window "
                f"with dilations {spec.dilations}")
        return spec.dilations
    dilations = []
    d = 1
    while 1 + (spec.kernel_size - 1) * (2 * d - 1) < window:
        dilations.append(d)
        d *= 2
    dilations.append(d)
    return tuple(dilations)


def _init_matrix(strategy: str, fan_in: int, fan_out: int,
                 rng: np.random.Generator) -> np.ndarray:
    return init_weights(strategy, (fan_in, fan_out), rng).data


def build_model(cfg: ModelConfig, rng: Optional[np.random.Generator] = None
                ) -> dict[str, Tensor]:
    """Create all parameter tensors for a configuration, deterministically."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    params: dict[str, Tensor] = {}

    def mat(name, fan_in, fan_out, reshape=None):
        w = _init_matrix(cfg.init, fan_in, fan_out, rng)
        params[name] = Tensor(w.reshape(reshape) if reshape else w)

    def zeros(name, *shape):
        params[name] = Tensor(np.zeros(shape))

    for si, spec in enumerate(cfg.stacks):
        for bi in range(spec.blocks):
            pfx = f"s{si}.b{bi}"
            if spec.kind in ENCODER_KINDS:
                dils = encoder_dilations(spec, cfg)
                c_in = cfg.n_x
                for li in range(len(dils)):
                    k = spec.kernel_size
                    if spec.kind == "wavenet":
                        mat(f"{pfx}.enc.l{li}.wf", k * c_in, spec.channels,
                            reshape=(k, c_in, spec.channels))
                        zeros(f"{pfx}.enc.l{li}.bf", spec.channels)
                        mat(f"{pfx}.enc.l{li}.wg", k * c_in, spec.channels,
                            reshape=(k, c_in, spec.channels))
                        zeros(f"{pfx}.enc.l{li}.bg", spec.channels)
                    else:
                        mat(f"{pfx}.enc.l{li}.w", k * c_in, spec.channels,
                            reshape=(k, c_in, spec.channels))
                        zeros(f"{pfx}.enc.l{li}.b", spec.channels)
                        if spec.activation == "prelu":
                            params[f"{pfx}.enc.l{li}.prelu"] = Tensor(np.full(1, 0.25))
                    c_in = spec.channels
                mat(f"{pfx}.dec_back.w", spec.channels, cfg.L)
                mat(f"{pfx}.dec_for.w", spec.channels, cfg.H)
            else:
                in_dim = cfg.L
                if spec.coefficients_take_x and cfg.n_x > 0:
                    in_dim += (cfg.L + cfg.H) * cfg.n_x
                for li, width in enumerate(spec.widths()):
                    mat(f"{pfx}.fcnn.w{li}", in_dim, width)
                    zeros(f"{pfx}.fcnn.b{li}", width)
                    if spec.activation == "prelu":
                        params[f"{pfx}.fcnn.prelu{li}"] = Tensor(np.full(1, 0.25))
                    if cfg.batch_norm:
                        params[f"{pfx}.fcnn.bn_gamma{li}"] = Tensor(np.ones(width))
                        zeros(f"{pfx}.fcnn.bn_beta{li}", width)
                    in_dim = width
                nb, nf = _coeff_dims(spec, cfg)
                mat(f"{pfx}.head_back.w", in_dim, nb)
                zeros(f"{pfx}.head_back.b", nb)
                mat(f"{pfx}.head_for.w", in_dim, nf)
                zeros(f"{pfx}.head_for.b", nf)
    return params


def n_parameters(params: dict[str, Tensor]) -> int:
    return sum(t.size for t in params.values())


def weight_names(params: dict[str, Tensor]) -> list[str]:
    """Names subject to L2 weight decay: projection and convolution matrices,
    excluding biases, PReLU slopes, and batch-norm scale/shift."""
    chosen = []
    for name in params:
        leaf = name.rsplit(".", 1)[-1]
        if leaf.startswith("w"):
            chosen.append(name)
    return chosen


# ---------------------------------------------------------------------------
# forward passes


def _activate(tape, x, spec: StackSpec, params, slope_name):
    kind = spec.activation
    if kind == "prelu":
        return T.prelu(tape, x, params[slope_name])
    return T.forward_op(tape, kind, x)


def _stack_bases(spec: StackSpec, cfg: ModelConfig):
    """Transposed fixed basis matrices (coeff_dim x span) or None for
    input-dependent / identity bases."""
    if spec.kind == "trend":
        vb = basis_mod.trend_basis(basis_mod.time_grid("backcast", cfg.L, cfg.H),
                                   spec.n_pol, "backcast")
        vf = basis_mod.trend_basis(basis_mod.time_grid("forecast", cfg.L, cfg.H),
                                   spec.n_pol, "forecast")
        return vb.matrix.T.copy(), vf.matrix.T.copy()
    if spec.kind == "seasonality":
        vb = basis_mod.harmonic_basis(basis_mod.time_grid("backcast", cfg.L, cfg.H),
                                      cfg.H, spec.n_hr, "backcast")
        vf = basis_mod.harmonic_basis(basis_mod.time_grid("forecast", cfg.L, cfg.H),
                                      cfg.H, spec.n_hr, "forecast")
        return vb.matrix.T.copy(), vf.matrix.T.copy()
    return None


_BASIS_CACHE: dict[tuple, tuple] = {}


def stack_bases(spec: StackSpec, cfg: ModelConfig):
    key = (spec, cfg.L, cfg.H)
    if key not in _BASIS_CACHE:
        _BASIS_CACHE[key] = _stack_bases(spec, cfg)
    return _BASIS_CACHE[key]


def encoder_context(tape, x: Tensor, params, pfx: str, spec: StackSpec,
                    cfg: ModelConfig, training=False, rng=None) -> Tensor:
    """Causal dilated convolution stack over the covariate window; returns the
    final layer's features at the last time step, one context vector per row."""
    dils = encoder_dilations(spec, cfg)
    h = x
    for li, d in enumerate(dils):
        if spec.kind == "wavenet":
            zf = T.causal_dilated_conv1d(tape, h, params[f"{pfx}.enc.l{li}.wf"],
                                         params[f"{pfx}.enc.l{li}.bf"], dilation=d)
            zg = T.causal_dilated_conv1d(tape, h, params[f"{pfx}.enc.l{li}.wg"],
                                         params[f"{pfx}.enc.l{li}.bg"], dilation=d)
            a = T.gated_unit(tape, zf, zg)
        else:
            z = T.causal_dilated_conv1d(tape, h, params[f"{pfx}.enc.l{li}.w"],
                                        params[f"{pfx}.enc.l{li}.b"], dilation=d)
            a = _activate(tape, z, spec, params, f"{pfx}.enc.l{li}.prelu")
        h = T.add(tape, a, h) if a.shape == h.shape else a
        if li < len(dils) - 1:
            h = T.dropout(tape, h, cfg.encoder_dropout, rng, training)
    t_len = h.shape[1]
    return T.tslice(tape, h, axis=1, start=t_len - 1, stop=t_len, squeeze=True)


def block_forward(tape, residual: Tensor, x: Tensor, x_flat: Optional[Tensor],
                  params, pfx: str, spec: StackSpec, cfg: ModelConfig,
                  training=False, rng=None):
    """One block: returns (backcast, forecast, coefficient tensors)."""
    if spec.kind in ENCODER_KINDS:
        c = encoder_context(tape, x, params, pfx, spec, cfg, training, rng)
        backcast = T.matmul(tape, c, params[f"{pfx}.dec_back.w"])
        forecast = T.matmul(tape, c, params[f"{pfx}.dec_for.w"])
        return backcast, forecast, [c]

    if spec.coefficients_take_x and cfg.n_x > 0:
        h = T.concat(tape, (residual, x_flat), axis=1)
    else:
        h = residual
    for li in range(len(spec.widths())):
        h = T.affine(tape, h, params[f"{pfx}.fcnn.w{li}"], params[f"{pfx}.fcnn.b{li}"])
        h = _activate(tape, h, spec, params, f"{pfx}.fcnn.prelu{li}")
        if cfg.batch_norm:
            h = T.batch_norm(tape, h, params[f"{pfx}.fcnn.bn_gamma{li}"],
                             params[f"{pfx}.fcnn.bn_beta{li}"])
    h = T.dropout(tape, h, cfg.dropout_prob, rng, training)
    theta_back = T.affine(tape, h, params[f"{pfx}.head_back.w"], params[f"{pfx}.head_back.b"])
    theta_for = T.affine(tape, h, params[f"{pfx}.head_for.w"], params[f"{pfx}.head_for.b"])

    if spec.kind == "identity":
        backcast, forecast = theta_back, theta_for
    elif spec.kind == "exogenous":
        x_back = T.tslice(tape, x, axis=1, start=0, stop=cfg.L)
        x_for = T.tslice(tape, x, axis=1, start=cfg.L, stop=cfg.L + cfg.H)
        backcast = T.matmul(tape, x_back, theta_back)
        forecast = T.matmul(tape, x_for, theta_for)
    else:
        vb_t, vf_t = stack_bases(spec, cfg)
        backcast = T.matmul(tape, theta_back, Tensor(vb_t))
        forecast = T.matmul(tape, theta_for, Tensor(vf_t))
    return backcast, forecast, [theta_back, theta_for]


def stack_forward(tape, residual: Tensor, x: Tensor, x_flat, params, si: int,
                  spec: StackSpec, cfg: ModelConfig, training=False, rng=None):
    """Doubly-residual chain over the stack's blocks."""
    forecast = None
    coeffs = []
    for bi in range(spec.blocks):
        backcast, f, c = block_forward(tape, residual, x, x_flat, params,
                                       f"s{si}.b{bi}", spec, cfg, training, rng)
        if not np.all(np.isfinite(f.data)) or not np.all(np.isfinite(backcast.data)):
            raise ShapeMismatchError(
                f"non-finite activations in stack {si} block {bi}")
        residual = T.sub(tape, residual, backcast)
        forecast = f if forecast is None else T.add(tape, forecast, f)
        coeffs.extend(c)
    return residual, forecast, coeffs


@dataclass
class NetworkOutput:
    forecast: Tensor                 # (batch, H)
    stack_forecasts: list[Tensor]    # one (batch, H) per stack
    coefficients: list[Tensor]       # block expansion coefficients / contexts
    final_residual: Tensor           # (batch, L) backcast residual after all stacks


def network_forward(params, cfg: ModelConfig, y_back, x, tape=None,
                    training=False, rng=None) -> NetworkOutput:
    """Full forward pass on a batch. ``y_back`` is (batch, L); ``x`` is
    (batch, L+H, n_x) and may be empty in the last axis."""
    y_back = np.asarray(y_back, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if y_back.ndim != 2 or y_back.shape[1] != cfg.L:
        raise ShapeMismatchError(f"network_forward: y_back shape {y_back.shape}, want (batch, {cfg.L})")
    if x.ndim != 3 or x.shape[0] != y_back.shape[0] or x.shape[1] != cfg.L + cfg.H \
            or x.shape[2] != cfg.n_x:
        raise ShapeMismatchError(
            f"network_forward: x shape {x.shape}, want ({y_back.shape[0]}, {cfg.L + cfg.H}, {cfg.n_x})")
    residual = Tensor(y_back)
    xt = Tensor(x)
    x_flat = Tensor(x.reshape(x.shape[0], -1)) if cfg.n_x > 0 else None

    stack_forecasts = []
    coefficients = []
    forecast = None
    for si, spec in enumerate(cfg.stacks):
        residual, f, coeffs = stack_forward(tape, residual, xt, x_flat, params,
                                            si, spec, cfg, training, rng)
        stack_forecasts.append(f)
        coefficients.extend(coeffs)
        forecast = f if forecast is None else T.add(tape, forecast, f)
    return NetworkOutput(forecast, stack_forecasts, coefficients, residual)


def forecast_single(params, cfg: ModelConfig, y_back, x) -> np.ndarray:
    """Inference-mode forecast for one window; returns an H-vector."""
    out = network_forward(params, cfg, np.asarray(y_back)[None, :],
                          np.asarray(x)[None, :, :], tape=None, training=False)
    return out.forecast.data[0].copy()


# ---------------------------------------------------------------------------
# decomposition


def stack_component_names(cfg: ModelConfig) -> list[str]:
    names = []
    for spec in cfg.stacks:
        base = spec.kind
        name = base
        k = 2
        while name in names:
            name = f"{base}{k}"
            k += 1
        names.append(name)
    return names


def is_interpretable(cfg: ModelConfig) -> bool:
    return all(s.kind in ("trend", "seasonality", "exogenous") for s in cfg.stacks)


@dataclass
class ForecastDecomposition:
    """Per-stack forecast components in original units.

    The first stack's component carries the normalization offset, so the
    component series sum exactly to the total forecast; ``level`` is the last
    observed value before the forecast origin, kept as a reference.
    """

    level: float
    components: dict[str, np.ndarray]
    total: np.ndarray
    residual: Optional[np.ndarray] = None


def decompose_window(params, cfg: ModelConfig, y_back_norm, x_norm, level: float,
                     center: float, scale: float, actuals=None) -> ForecastDecomposition:
    """Run one inference forward pass and map per-stack outputs to original units."""
    out = network_forward(params, cfg, np.asarray(y_back_norm)[None, :],
                          np.asarray(x_norm)[None, :, :], tape=None)
    names = stack_component_names(cfg)
    components = {}
    for i, (name, f) in enumerate(zip(names, out.stack_forecasts)):
        comp = scale * f.data[0]
        if i == 0:
            comp = comp + center
        components[name] = comp
    total = center + scale * out.forecast.data[0]
    residual = None if actuals is None else np.asarray(actuals, dtype=np.float64) - total
    return ForecastDecomposition(level=float(level), components=components,
                                 total=total, residual=residual)


# ---------------------------------------------------------------------------
# serialization


def config_to_dict(cfg: ModelConfig) -> dict:
    d = asdict(cfg)
    d["stacks"] = [asdict(s) for s in cfg.stacks]
    return d


def config_from_dict(d: dict) -> ModelConfig:
    stacks = []
    for s in d["stacks"]:
        s = dict(s)
        if isinstance(s.get("hidden_units"), list):
            s["hidden_units"] = tuple(s["hidden_units"])
        if isinstance(s.get("dilations"), list):
            s["dilations"] = tuple(s["dilations"])
        stacks.append(StackSpec(**s))
    rest = {k: v for k, v in d.items() if k != "stacks"}
    return ModelConfig(stacks=tuple(stacks), **rest)


def save_model(path, cfg: ModelConfig, params: dict[str, Tensor],
               normalization: Optional[dict] = None) -> None:
    """Self-describing container: JSON header (format version, config, and the
    fitted normalization record) plus a little-endian f64 tensor payload."""
    names = sorted(params)
    header = {
        "format_version": MODEL_FORMAT_VERSION,
        "config": config_to_dict(cfg),
        "normalization": normalization,
        "tensors": [{"name": n, "shape": list(params[n].shape)} for n in names],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<II", MODEL_FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(params[n].data, dtype="<f8").tobytes())


def load_model(path) -> tuple[ModelConfig, dict[str, Tensor], Optional[dict]]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MODEL_MAGIC:
            raise ConfigError(f"{path}: not a model container (bad magic {magic!r})")
        version, blob_len = struct.unpack("<II", fh.read(8))
        if version != MODEL_FORMAT_VERSION:
            raise ConfigError(f"{path}: unsupported format version {version}")
        header = json.loads(fh.read(blob_len).decode("utf-8"))
        cfg = config_from_dict(header["config"])
        params = {}
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            arr = np.frombuffer(buf, dtype="<f8").reshape(shape).astype(np.float64)
            params[entry["name"]] = Tensor(arr)
    return cfg, params, header.get("normalization")
