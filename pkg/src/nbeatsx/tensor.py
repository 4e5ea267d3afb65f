"""Dense f64 tensors with a recorded computation graph for reverse-mode gradients.

A ``Tape`` records every operation applied to tensors in insertion order, so
node inputs always reference earlier nodes and the backward pass is a single
reverse sweep over the node list.  Passing ``tape=None`` to any op runs the
same forward computation without recording (inference mode).
"""

from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ShapeMismatchError

SELU_ALPHA = 1.6732632423543772848170429916717
SELU_LAMBDA = 1.0507009873554804934193349852946


class Tensor:
    """A dense float64 array. Becomes a graph node once an op on a tape touches it."""

    __slots__ = ("data",)

    def __init__(self, data):
        self.data = np.asarray(data, dtype=np.float64)

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


class Node:
    __slots__ = ("kind", "inputs", "backward_fn", "out")

    def __init__(self, kind, inputs, backward_fn, out):
        self.kind = kind
        self.inputs = inputs          # ids of earlier nodes
        self.backward_fn = backward_fn  # grad_out -> tuple of input grads (None allowed)
        self.out = out                # keeps the output tensor alive for id stability


class Tape:
    """Append-only op recorder with a registry of named trainable leaves."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.params: dict[str, Tensor] = {}
        self._ids: dict[int, int] = {}

    def _leaf(self, t: Tensor) -> int:
        nid = self._ids.get(id(t))
        if nid is None:
            nid = len(self.nodes)
            self.nodes.append(Node("leaf", (), None, t))
            self._ids[id(t)] = nid
        return nid

    def register_parameter(self, name: str, t: Tensor) -> None:
        self.params[name] = t
        self._leaf(t)

    def register_parameters(self, params: dict[str, Tensor]) -> None:
        for name, t in params.items():
            self.register_parameter(name, t)

    def record(self, kind, out: Tensor, inputs: Sequence[Tensor], backward_fn) -> None:
        input_ids = tuple(self._leaf(t) for t in inputs)
        nid = len(self.nodes)
        self.nodes.append(Node(kind, input_ids, backward_fn, out))
        self._ids[id(out)] = nid


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _shape_error(kind: str, *shapes) -> ShapeMismatchError:
    pretty = " vs ".join(str(tuple(s)) for s in shapes)
    return ShapeMismatchError(f"{kind}: incompatible shapes {pretty}")


# ---------------------------------------------------------------------------
# elementwise arithmetic


def _elementwise(tape, kind, a: Tensor, b: Tensor, fwd, bwd_a, bwd_b) -> Tensor:
    try:
        out_data = fwd(a.data, b.data)
    except ValueError:
        raise _shape_error(kind, a.shape, b.shape) from None
    out = Tensor(out_data)
    if tape is not None:
        def backward(g):
            return (_unbroadcast(bwd_a(g), a.shape), _unbroadcast(bwd_b(g), b.shape))
        tape.record(kind, out, (a, b), backward)
    return out


def add(tape, a, b):
    return _elementwise(tape, "add", a, b, np.add, lambda g: g, lambda g: g)


def sub(tape, a, b):
    return _elementwise(tape, "sub", a, b, np.subtract, lambda g: g, lambda g: -g)


def hadamard(tape, a, b):
    ad, bd = a.data, b.data
    return _elementwise(tape, "hadamard", a, b, np.multiply,
                        lambda g: g * bd, lambda g: g * ad)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(tape, a: Tensor, b: Tensor) -> Tensor:
    """Matrix product.

    Supports 2D @ 2D, 2D @ 1D, 1D @ 2D, and the batched matrix-vector form
    (B, m, n) @ (B, n) -> (B, m).
    """
    ad, bd = a.data, b.data
    if ad.ndim == 3 and bd.ndim == 2:
        if ad.shape[0] != bd.shape[0] or ad.shape[2] != bd.shape[1]:
            raise _shape_error("matmul", ad.shape, bd.shape)
        out = Tensor(np.matmul(ad, bd[:, :, None])[:, :, 0])
        if tape is not None:
            def backward(g):
                ga = g[:, :, None] * bd[:, None, :]
                gb = np.einsum("bmn,bm->bn", ad, g)
                return (ga, gb)
            tape.record("matmul", out, (a, b), backward)
        return out

    if ad.ndim not in (1, 2) or bd.ndim not in (1, 2):
        raise _shape_error("matmul", ad.shape, bd.shape)
    inner_a = ad.shape[-1]
    inner_b = bd.shape[0]
    if inner_a != inner_b:
        raise _shape_error("matmul", ad.shape, bd.shape)
    out = Tensor(ad @ bd)
    if tape is not None:
        def backward(g):
            if ad.ndim == 2 and bd.ndim == 2:
                return (g @ bd.T, ad.T @ g)
            if ad.ndim == 2 and bd.ndim == 1:
                return (np.outer(g, bd), ad.T @ g)
            if ad.ndim == 1 and bd.ndim == 2:
                return (bd @ g, np.outer(ad, g))
            return (g * bd, g * ad)  # 1D @ 1D dot product
        tape.record("matmul", out, (a, b), backward)
    return out


def affine(tape, x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b with x of shape (batch, n) or (n,), w (n, m), b (m,)."""
    xd, wd, bd = x.data, w.data, b.data
    if xd.shape[-1] != wd.shape[0] or wd.shape[1] != bd.shape[0]:
        raise _shape_error("affine", xd.shape, wd.shape, bd.shape)
    out = Tensor(xd @ wd + bd)
    if tape is not None:
        def backward(g):
            gx = g @ wd.T
            if xd.ndim == 2:
                return (gx, xd.T @ g, g.sum(axis=0))
            return (gx, np.outer(xd, g), g)
        tape.record("affine", out, (x, w, b), backward)
    return out


# ---------------------------------------------------------------------------
# reductions and reshaping


def tsum(tape, x: Tensor, axis=None) -> Tensor:
    out = Tensor(x.data.sum(axis=axis))
    if tape is not None:
        shape = x.shape

        def backward(g):
            if axis is None:
                return (np.broadcast_to(g, shape).copy(),)
            g = np.expand_dims(g, axis=axis)
            return (np.broadcast_to(g, shape).copy(),)
        tape.record("sum", out, (x,), backward)
    return out


def tmean(tape, x: Tensor, axis=None) -> Tensor:
    count = x.data.size if axis is None else x.data.shape[axis]
    out = Tensor(x.data.mean(axis=axis))
    if tape is not None:
        shape = x.shape

        def backward(g):
            if axis is None:
                return (np.broadcast_to(g / count, shape).copy(),)
            g = np.expand_dims(g / count, axis=axis)
            return (np.broadcast_to(g, shape).copy(),)
        tape.record("mean", out, (x,), backward)
    return out


def concat(tape, tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    if tape is not None:
        sizes = [t.data.shape[axis] for t in tensors]
        splits = np.cumsum(sizes)[:-1]

        def backward(g):
            return tuple(np.split(g, splits, axis=axis))
        tape.record("concat", out, tuple(tensors), backward)
    return out


def tslice(tape, x: Tensor, axis: int, start: int, stop: int, squeeze: bool = False) -> Tensor:
    index = [slice(None)] * x.data.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    data = x.data[index]
    if squeeze:
        if stop - start != 1:
            raise _shape_error("slice", x.shape, (stop - start,))
        data = np.squeeze(data, axis=axis)
    out = Tensor(data.copy())
    if tape is not None:
        shape = x.shape

        def backward(g):
            gx = np.zeros(shape)
            gx[index] = np.expand_dims(g, axis=axis) if squeeze else g
            return (gx,)
        tape.record("slice", out, (x,), backward)
    return out


# ---------------------------------------------------------------------------
# activations


def _unary(tape, kind, x: Tensor, out_data, grad_local) -> Tensor:
    out = Tensor(out_data)
    if tape is not None:
        def backward(g):
            return (g * grad_local,)
        tape.record(kind, out, (x,), backward)
    return out


def relu(tape, x):
    return _unary(tape, "relu", x, np.maximum(x.data, 0.0), (x.data > 0).astype(np.float64))


def lrelu(tape, x, slope: float = 0.01):
    d = np.where(x.data > 0, 1.0, slope)
    return _unary(tape, "lrelu", x, np.where(x.data > 0, x.data, slope * x.data), d)


def prelu(tape, x: Tensor, slope: Tensor) -> Tensor:
    """Parametric ReLU with a learnable slope tensor (scalar or broadcastable)."""
    xd, sd = x.data, slope.data
    out = Tensor(np.where(xd > 0, xd, sd * xd))
    if tape is not None:
        def backward(g):
            gx = np.where(xd > 0, 1.0, sd) * g
            gs = _unbroadcast(np.where(xd > 0, 0.0, xd) * g, slope.shape)
            return (gx, gs)
        tape.record("prelu", out, (x, slope), backward)
    return out


def selu(tape, x):
    xd = x.data
    ex = np.exp(np.minimum(xd, 0.0))
    out_data = SELU_LAMBDA * np.where(xd > 0, xd, SELU_ALPHA * (ex - 1.0))
    local = SELU_LAMBDA * np.where(xd > 0, 1.0, SELU_ALPHA * ex)
    return _unary(tape, "selu", x, out_data, local)


def softplus(tape, x):
    xd = x.data
    out_data = np.maximum(xd, 0.0) + np.log1p(np.exp(-np.abs(xd)))
    z = np.exp(-np.abs(xd))
    sig = np.where(xd >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return _unary(tape, "softplus", x, out_data, sig)


def sigmoid(tape, x):
    z = np.exp(-np.abs(x.data))
    s = np.where(x.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return _unary(tape, "sigmoid", x, s, s * (1.0 - s))


def tanh(tape, x):
    t = np.tanh(x.data)
    return _unary(tape, "tanh", x, t, 1.0 - t * t)


def tabs(tape, x):
    # subgradient at 0 is 0 for stability at the kink
    return _unary(tape, "abs", x, np.abs(x.data), np.sign(x.data))


def gated_unit(tape, a: Tensor, b: Tensor) -> Tensor:
    """tanh(a) * sigmoid(b), the WaveNet-style gate."""
    if a.shape != b.shape:
        raise _shape_error("gated_unit", a.shape, b.shape)
    t = np.tanh(a.data)
    z = np.exp(-np.abs(b.data))
    s = np.where(b.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    out = Tensor(t * s)
    if tape is not None:
        def backward(g):
            return (g * s * (1.0 - t * t), g * t * s * (1.0 - s))
        tape.record("gated_unit", out, (a, b), backward)
    return out


# ---------------------------------------------------------------------------
# stochastic / normalization ops


def dropout(tape, x: Tensor, p: float, rng: Optional[np.random.Generator] = None,
            training: bool = False) -> Tensor:
    """Inverted dropout: scales by 1/(1-p) at train time, identity at inference."""
    if not training or p <= 0.0:
        return x
    if rng is None:
        raise ValueError("dropout: training mode requires a seeded rng")
    if p >= 1.0:
        raise ValueError(f"dropout: p must be < 1, got {p}")
    mask = (rng.random(x.data.shape) >= p) / (1.0 - p)
    out = Tensor(x.data * mask)
    if tape is not None:
        def backward(g):
            return (g * mask,)
        tape.record("dropout", out, (x,), backward)
    return out


def batch_norm(tape, x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the batch axis (axis 0) with learnable scale and shift."""
    xd = x.data
    if xd.ndim != 2:
        raise _shape_error("batch_norm", xd.shape)
    n = xd.shape[0]
    mu = xd.mean(axis=0)
    var = xd.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (xd - mu) * inv_std
    out = Tensor(gamma.data * xhat + beta.data)
    if tape is not None:
        gd = gamma.data

        def backward(g):
            dxhat = g * gd
            dx = (inv_std / n) * (n * dxhat - dxhat.sum(axis=0)
                                  - xhat * (dxhat * xhat).sum(axis=0))
            return (dx, (g * xhat).sum(axis=0), g.sum(axis=0))
        tape.record("batch_norm", out, (x, gamma, beta), backward)
    return out


def causal_dilated_conv1d(tape, x: Tensor, kernel: Tensor, bias: Optional[Tensor] = None,
                          dilation: int = 1) -> Tensor:
    """1-D convolution padded only on the past side.

    ``x`` is (batch, time, in_channels) and ``kernel`` is (taps, in, out); the
    last kernel tap aligns with the current time step, so output at time t
    depends on inputs at t, t-d, ..., t-(k-1)d only.  1-D ``x``/``kernel`` are
    accepted as single-channel convenience forms.
    """
    xd, kd = x.data, kernel.data
    flat = xd.ndim == 1
    if flat:
        if kd.ndim != 1:
            raise _shape_error("causal_dilated_conv1d", xd.shape, kd.shape)
        xd = xd[None, :, None]
        kd = kd[:, None, None]
    if xd.ndim != 3 or kd.ndim != 3 or xd.shape[2] != kd.shape[1]:
        raise _shape_error("causal_dilated_conv1d", x.shape, kernel.shape)
    if dilation < 1:
        raise ValueError(f"causal_dilated_conv1d: dilation must be >= 1, got {dilation}")
    k = kd.shape[0]
    t_len = xd.shape[1]
    out_data = np.zeros((xd.shape[0], t_len, kd.shape[2]))
    for j in range(k):
        shift = (k - 1 - j) * dilation
        if shift >= t_len:
            continue
        if shift == 0:
            out_data += xd @ kd[j]
        else:
            out_data[:, shift:, :] += xd[:, :t_len - shift, :] @ kd[j]
    if bias is not None:
        out_data += bias.data
    out = Tensor(out_data[0, :, 0] if flat else out_data)
    if tape is not None:
        def backward(g):
            g3 = g[None, :, None] if flat else g
            gx = np.zeros_like(xd)
            gk = np.zeros_like(kd)
            for j in range(k):
                shift = (k - 1 - j) * dilation
                if shift >= t_len:
                    continue
                if shift == 0:
                    gx += g3 @ kd[j].T
                    gk[j] = np.tensordot(xd, g3, axes=([0, 1], [0, 1]))
                else:
                    gx[:, :t_len - shift, :] += g3[:, shift:, :] @ kd[j].T
                    gk[j] = np.tensordot(xd[:, :t_len - shift], g3[:, shift:],
                                         axes=([0, 1], [0, 1]))
            if flat:
                gx = gx[0, :, 0]
                gk = gk[:, 0, 0]
            grads = (gx, gk) if bias is None else (gx, gk, g3.sum(axis=(0, 1)))
            return grads
        inputs = (x, kernel) if bias is None else (x, kernel, bias)
        tape.record("causal_dilated_conv1d", out, inputs, backward)
    return out


# ---------------------------------------------------------------------------
# generic dispatch

OP_KINDS = ("matmul", "add", "sub", "hadamard", "concat", "slice", "sum", "mean",
            "affine", "relu", "lrelu", "prelu", "selu", "softplus", "sigmoid",
            "tanh", "dropout", "batch_norm", "causal_dilated_conv1d", "gated_unit",
            "abs")

_DISPATCH: dict[str, Callable] = {
    "matmul": matmul,
    "add": add,
    "sub": sub,
    "hadamard": hadamard,
    "concat": lambda tape, *xs, **attrs: concat(tape, xs, **attrs),
    "slice": tslice,
    "sum": tsum,
    "mean": tmean,
    "affine": affine,
    "relu": relu,
    "lrelu": lrelu,
    "prelu": prelu,
    "selu": selu,
    "softplus": softplus,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "dropout": dropout,
    "batch_norm": batch_norm,
    "causal_dilated_conv1d": causal_dilated_conv1d,
    "gated_unit": gated_unit,
    "abs": tabs,
}


def forward_op(tape, kind: str, *inputs: Tensor, **attrs) -> Tensor:
    """Apply an op by kind name, recording it on the tape when one is given."""
    try:
        fn = _DISPATCH[kind]
    except KeyError:
        raise ValueError(f"unknown op kind {kind!r}") from None
    return fn(tape, *inputs, **attrs)


# ---------------------------------------------------------------------------
# backward pass and gradient checking


def backward(tape: Tape, loss: Tensor) -> dict[str, np.ndarray]:
    """Reverse sweep over the tape; returns a gradient per registered parameter.

    Gradients accumulate across fan-out; parameters unreachable from the loss
    get exact zeros.
    """
    if loss.size != 1:
        raise ValueError(f"backward: loss must be scalar, got shape {loss.shape}")
    loss_id = tape._ids.get(id(loss))
    if loss_id is None:
        raise ValueError("backward: loss tensor was not produced on this tape")
    grads: list[Optional[np.ndarray]] = [None] * len(tape.nodes)
    grads[loss_id] = np.ones_like(loss.data)
    for nid in range(loss_id, -1, -1):
        node = tape.nodes[nid]
        g = grads[nid]
        if g is None or node.backward_fn is None:
            continue
        for iid, ig in zip(node.inputs, node.backward_fn(g)):
            if ig is None:
                continue
            if grads[iid] is None:
                grads[iid] = ig
            else:
                grads[iid] = grads[iid] + ig
    result = {}
    for name, t in tape.params.items():
        g = grads[tape._ids[id(t)]]
        result[name] = np.zeros_like(t.data) if g is None else g
    return result


def grad_check(build, params: dict[str, Tensor], eps: float = 1e-6,
               max_entries_per_param: Optional[int] = None, seed: int = 0) -> float:
    """Compare tape gradients against central finite differences.

    ``build(tape)`` must construct a scalar loss from the given parameter
    tensors. Returns the worst relative error with denominator
    max(|analytic|, |numeric|, 1e-8).  Entries sitting on a kink of the loss
    (detected by an O(eps) second difference) are excluded, matching the
    subgradient convention of the non-smooth ops.
    """
    if eps <= 0:
        raise ValueError("grad_check: eps must be positive")
    tape = Tape()
    tape.register_parameters(params)
    loss = build(tape)
    f0 = float(loss.data)
    if not math.isfinite(f0):
        raise ValueError("grad_check: non-finite loss at the base point")
    analytic = backward(tape, loss)

    kink_tol = 50.0 * eps ** 1.5
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, t in params.items():
        flat = t.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries_per_param is not None and flat.size > max_entries_per_param:
            idx = rng.choice(flat.size, size=max_entries_per_param, replace=False)
        for i in idx:
            x0 = flat[i]
            flat[i] = x0 + eps
            x_plus = flat[i]
            fp = float(build(None).data)
            flat[i] = x0 - eps
            x_minus = flat[i]
            fm = float(build(None).data)
            flat[i] = x0
            if not (math.isfinite(fp) and math.isfinite(fm)):
                raise ValueError(f"grad_check: non-finite loss perturbing {name}[{i}]")
            if abs(fp + fm - 2.0 * f0) > kink_tol:
                continue
            # divide by the perturbation as actually stored, not the nominal 2*eps
            numeric = (fp - fm) / (x_plus - x_minus)
            a = float(analytic[name].reshape(-1)[i])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst
