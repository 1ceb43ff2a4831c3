"""Recurrent convolutional network: per-window CNN features feeding an LSTM.

Each 4 x 256 window goes through conv -> ReLU -> max-pool -> conv -> ReLU ->
max-pool -> dense(ReLU); the dense code drives one LSTM step whose hidden
state feeds a sigmoid output unit. Gradients are written out by hand.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..preprocess import ConfigError
from .mlp import sigmoid

GATES = 4  # input, forget, cell, output


@dataclass(frozen=True)
class RcnnConfig:
    in_channels: int = 4
    width: int = 256
    conv1_filters: int = 16
    conv1_kernel: int = 8
    pool1: int = 4
    conv2_filters: int = 32
    conv2_kernel: int = 8
    pool2: int = 4
    dense: int = 64
    hidden: int = 64
    truncation: int = 16
    epochs: int = 50
    batch_size: int = 8
    lr: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        for name in ("in_channels", "width", "conv1_filters", "conv1_kernel", "pool1",
                     "conv2_filters", "conv2_kernel", "pool2", "dense", "hidden",
                     "truncation", "epochs", "batch_size"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if self.flat_size < 1:
            raise ConfigError(f"width {self.width} is too short for the kernel and pool sizes")

    @property
    def shapes(self) -> tuple[int, int, int, int]:
        """Lengths after conv1, pool1, conv2, pool2."""
        l1 = self.width - self.conv1_kernel + 1
        p1 = max(l1, 0) // self.pool1
        l2 = p1 - self.conv2_kernel + 1
        p2 = max(l2, 0) // self.pool2
        return l1, p1, l2, p2

    @property
    def flat_size(self) -> int:
        return self.conv2_filters * self.shapes[3]


PARAM_SHAPES = {
    "conv1_w": lambda c: (c.conv1_filters, c.in_channels, c.conv1_kernel),
    "conv1_b": lambda c: (c.conv1_filters,),
    "conv2_w": lambda c: (c.conv2_filters, c.conv1_filters, c.conv2_kernel),
    "conv2_b": lambda c: (c.conv2_filters,),
    "dense_w": lambda c: (c.flat_size, c.dense),
    "dense_b": lambda c: (c.dense,),
    "lstm_wx": lambda c: (c.dense, GATES * c.hidden),
    "lstm_wh": lambda c: (c.hidden, GATES * c.hidden),
    "lstm_b": lambda c: (GATES * c.hidden,),
    "out_w": lambda c: (c.hidden,),
    "out_b": lambda c: (),
}


@dataclass(frozen=True)
class RcnnParams:
    """Trainable weights plus a fixed per-channel input standardization."""

    config: RcnnConfig
    weights: dict[str, np.ndarray] = field(default_factory=dict)
    input_mean: np.ndarray | None = None
    input_std: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "weights",
                           {k: np.asarray(v, dtype=np.float64) for k, v in self.weights.items()})
        c = self.config.in_channels
        mean = np.zeros(c) if self.input_mean is None else np.asarray(self.input_mean, dtype=np.float64)
        std = np.ones(c) if self.input_std is None else np.asarray(self.input_std, dtype=np.float64)
        if mean.shape != (c,) or std.shape != (c,) or np.any(std <= 0):
            raise ValueError(f"input standardization needs {c} means and {c} positive deviations")
        object.__setattr__(self, "input_mean", mean)
        object.__setattr__(self, "input_std", std)
        for name, shape_fn in PARAM_SHAPES.items():
            if name not in self.weights:
                raise ValueError(f"missing parameter {name!r}")
            if self.weights[name].shape != shape_fn(self.config):
                raise ValueError(f"{name} has shape {self.weights[name].shape}, "
                                 f"expected {shape_fn(self.config)}")

    def with_weights(self, weights: dict[str, np.ndarray]) -> "RcnnParams":
        return RcnnParams(self.config, weights, self.input_mean, self.input_std)

    def standardize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.input_mean[:, None]) / self.input_std[:, None]


def rcnn_zeros(cfg: RcnnConfig) -> RcnnParams:
    return RcnnParams(cfg, {k: np.zeros(f(cfg)) for k, f in PARAM_SHAPES.items()})


def rcnn_init(cfg: RcnnConfig, rng: np.random.Generator, input_mean=None, input_std=None
              ) -> RcnnParams:
    """He-uniform for the ReLU layers, Glorot-uniform for the LSTM, forget bias 1."""
    def he(shape, fan_in):
        lim = np.sqrt(6.0 / fan_in)
        return rng.uniform(-lim, lim, size=shape)

    def glorot(shape):
        lim = np.sqrt(6.0 / (shape[0] + shape[1]))
        return rng.uniform(-lim, lim, size=shape)

    h = cfg.hidden
    b = np.zeros(GATES * h)
    b[h:2 * h] = 1.0
    w = {
        "conv1_w": he(PARAM_SHAPES["conv1_w"](cfg), cfg.in_channels * cfg.conv1_kernel),
        "conv1_b": np.zeros(cfg.conv1_filters),
        "conv2_w": he(PARAM_SHAPES["conv2_w"](cfg), cfg.conv1_filters * cfg.conv2_kernel),
        "conv2_b": np.zeros(cfg.conv2_filters),
        "dense_w": he((cfg.flat_size, cfg.dense), cfg.flat_size),
        "dense_b": np.zeros(cfg.dense),
        "lstm_wx": glorot((cfg.dense, GATES * h)),
        "lstm_wh": glorot((h, GATES * h)),
        "lstm_b": b,
        "out_w": glorot((h, 1))[:, 0],
        "out_b": np.zeros(()),
    }
    return RcnnParams(cfg, w, input_mean, input_std)


def channel_stats(tensor: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and standard deviation of a ``(W, C, L)`` stack."""
    mean = tensor.mean(axis=(0, 2))
    std = tensor.std(axis=(0, 2))
    return mean, np.where(std > 0, std, 1.0)


# -- convolution / pooling primitives on (N, C, L) stacks --------------------

def _conv_forward(x, w, b):
    n, c, _ = x.shape
    f, _, k = w.shape
    cols = sliding_window_view(x, k, axis=2)  # (N, C, Lo, k)
    lo = cols.shape[2]
    cols = cols.transpose(0, 2, 1, 3).reshape(n * lo, c * k)
    out = cols @ w.reshape(f, c * k).T + b
    return out.reshape(n, lo, f).transpose(0, 2, 1), cols


def _conv_backward(dout, cols, x_shape, w):
    n, c, length = x_shape
    f, _, k = w.shape
    lo = dout.shape[2]
    d2 = dout.transpose(0, 2, 1).reshape(n * lo, f)
    dw = (d2.T @ cols).reshape(f, c, k)
    db = d2.sum(axis=0)
    dcols = (d2 @ w.reshape(f, c * k)).reshape(n, lo, c, k)
    dx = np.zeros(x_shape)
    for j in range(k):
        dx[:, :, j:j + lo] += dcols[:, :, :, j].transpose(0, 2, 1)
    return dx, dw, db


def _pool_forward(x, p):
    n, c, length = x.shape
    m = length // p
    blocks = x[:, :, :m * p].reshape(n, c, m, p)
    arg = blocks.argmax(axis=3)
    out = np.take_along_axis(blocks, arg[..., None], axis=3)[..., 0]
    return out, arg


def _pool_backward(dout, arg, x_shape, p):
    n, c, length = x_shape
    m = dout.shape[2]
    dblocks = np.zeros((n, c, m, p))
    np.put_along_axis(dblocks, arg[..., None], dout[..., None], axis=3)
    dx = np.zeros(x_shape)
    dx[:, :, :m * p] = dblocks.reshape(n, c, m * p)
    return dx


def _check_windows(params: RcnnParams, x: np.ndarray):
    cfg = params.config
    if x.shape[-2:] != (cfg.in_channels, cfg.width):
        raise ValueError(f"window shape {x.shape[-2:]} does not match "
                         f"({cfg.in_channels}, {cfg.width})")


def cnn_encode(params: RcnnParams, x: np.ndarray, keep_cache: bool = False):
    """Dense-layer code for a ``(N, C, L)`` stack of already standardized windows."""
    cfg, w = params.config, params.weights
    a1, cols1 = _conv_forward(x, w["conv1_w"], w["conv1_b"])
    r1 = np.maximum(a1, 0.0)
    p1, arg1 = _pool_forward(r1, cfg.pool1)
    a2, cols2 = _conv_forward(p1, w["conv2_w"], w["conv2_b"])
    r2 = np.maximum(a2, 0.0)
    p2, arg2 = _pool_forward(r2, cfg.pool2)
    flat = p2.reshape(x.shape[0], -1)
    d = np.maximum(flat @ w["dense_w"] + w["dense_b"], 0.0)
    if not keep_cache:
        return d
    return d, (x.shape, cols1, a1, arg1, p1.shape, cols2, a2, arg2, p2.shape, flat)


def _cnn_backward(params: RcnnParams, dd, d, cache, grads):
    cfg, w = params.config, params.weights
    x_shape, cols1, a1, arg1, p1_shape, cols2, a2, arg2, p2_shape, flat = cache
    dd = dd * (d > 0)
    grads["dense_w"] = flat.T @ dd
    grads["dense_b"] = dd.sum(axis=0)
    dp2 = (dd @ w["dense_w"].T).reshape(p2_shape)
    dr2 = _pool_backward(dp2, arg2, a2.shape, cfg.pool2)
    da2 = dr2 * (a2 > 0)
    dp1, grads["conv2_w"], grads["conv2_b"] = _conv_backward(da2, cols2, p1_shape, w["conv2_w"])
    dr1 = _pool_backward(dp1, arg1, a1.shape, cfg.pool1)
    da1 = dr1 * (a1 > 0)
    _, grads["conv1_w"], grads["conv1_b"] = _conv_backward(da1, cols1, x_shape, w["conv1_w"])


# -- LSTM ----------------------------------------------------------------------

def _lstm_step(w, d, h, c):
    hid = h.shape[1]
    z = d @ w["lstm_wx"] + h @ w["lstm_wh"] + w["lstm_b"]
    i = sigmoid(z[:, :hid])
    f = sigmoid(z[:, hid:2 * hid])
    g = np.tanh(z[:, 2 * hid:3 * hid])
    o = sigmoid(z[:, 3 * hid:])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    return o * tc, c_new, (i, f, g, o, tc)


def zero_carry(cfg: RcnnConfig, batch: int | None = None):
    shape = (cfg.hidden,) if batch is None else (batch, cfg.hidden)
    return np.zeros(shape), np.zeros(shape)


def rcnn_forward(params: RcnnParams, window, carry=None):
    """Event probability for one ``(C, L)`` window and the updated ``(h, c)`` carry."""
    x = np.asarray(window, dtype=np.float64)
    _check_windows(params, x)
    if x.ndim != 2:
        raise ValueError(f"expected one (C, L) window, got shape {x.shape}")
    cfg, w = params.config, params.weights
    h, c = zero_carry(cfg) if carry is None else carry
    h = np.asarray(h, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if h.shape != (cfg.hidden,) or c.shape != (cfg.hidden,):
        raise ValueError(f"carry must have shape ({cfg.hidden},)")
    d = cnn_encode(params, params.standardize(x)[None])
    h2, c2, _ = _lstm_step(w, d, h[None], c[None])
    p = sigmoid(h2 @ w["out_w"] + w["out_b"])
    return float(p[0]), (h2[0], c2[0])


def rcnn_sequence_probs(params: RcnnParams, x) -> np.ndarray:
    """Probabilities for ``(B, T, C, L)`` sequences run from a zero carry, shape ``(B, T)``."""
    x = np.asarray(x, dtype=np.float64)
    _check_windows(params, x)
    b, t = x.shape[:2]
    w = params.weights
    d = cnn_encode(params, params.standardize(x.reshape(b * t, *x.shape[2:]))).reshape(b, t, -1)
    h, c = zero_carry(params.config, b)
    out = np.empty((b, t))
    for s in range(t):
        h, c, _ = _lstm_step(w, d[:, s], h, c)
        out[:, s] = sigmoid(h @ w["out_w"] + w["out_b"])
    return out


def rcnn_grad(params: RcnnParams, x, y, scale: float = 1.0
              ) -> tuple[float, dict[str, np.ndarray]]:
    """Mean binary cross-entropy over ``(B, T)`` windows and its exact gradient.

    ``x`` is ``(B, T, C, L)`` (or ``(T, C, L)`` for a single sequence); each
    sequence starts from a zero carry. ``y`` may be fractional.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim == 3:
        x, y = x[None], y[None]
    _check_windows(params, x)
    b, t = x.shape[:2]
    if y.shape != (b, t):
        raise ValueError(f"targets have shape {y.shape}, expected {(b, t)}")
    cfg, w = params.config, params.weights
    hid = cfg.hidden
    d, cache = cnn_encode(params, params.standardize(x.reshape(b * t, *x.shape[2:])), keep_cache=True)
    d3 = d.reshape(b, t, -1)

    h, c = zero_carry(cfg, b)
    hs, cs, gates, zs = [h], [c], [], np.empty((b, t))
    for s in range(t):
        h, c, gate = _lstm_step(w, d3[:, s], h, c)
        hs.append(h)
        cs.append(c)
        gates.append(gate)
        zs[:, s] = h @ w["out_w"] + w["out_b"]
    n = b * t
    loss = scale * float(np.mean(np.logaddexp(0.0, zs) - y * zs))
    dz = scale * (sigmoid(zs) - y) / n

    grads = {k: np.zeros_like(v) for k, v in w.items()}
    dd3 = np.zeros_like(d3)
    dh_next = np.zeros((b, hid))
    dc_next = np.zeros((b, hid))
    for s in reversed(range(t)):
        i, f, g, o, tc = gates[s]
        h_prev, c_prev = hs[s], cs[s]
        grads["out_w"] += hs[s + 1].T @ dz[:, s]
        grads["out_b"] += dz[:, s].sum()
        dh = np.outer(dz[:, s], w["out_w"]) + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        dzg = np.concatenate([
            dc * g * i * (1.0 - i),
            dc * c_prev * f * (1.0 - f),
            dc * i * (1.0 - g * g),
            dh * tc * o * (1.0 - o),
        ], axis=1)
        grads["lstm_wx"] += d3[:, s].T @ dzg
        grads["lstm_wh"] += h_prev.T @ dzg
        grads["lstm_b"] += dzg.sum(axis=0)
        dd3[:, s] = dzg @ w["lstm_wx"].T
        dh_next = dzg @ w["lstm_wh"].T
        dc_next = dc * f
    _cnn_backward(params, dd3.reshape(n, -1), d, cache, grads)
    return loss, grads


def rcnn_predict_series(params: RcnnParams, tensor, context: int | None = None) -> np.ndarray:
    """Per-window probabilities for a contiguous ``(W, C, L)`` run of windows.

    Window ``w`` is scored after running the LSTM from a zero carry over the
    ``context`` windows ending at ``w`` (fewer at the start of the run), which
    matches how sub-sequences are seen during training.
    """
    x = np.asarray(tensor, dtype=np.float64)
    _check_windows(params, x)
    cfg, wts = params.config, params.weights
    n = x.shape[0]
    if n == 0:
        return np.zeros(0)
    ctx = cfg.truncation if context is None else int(context)
    if ctx < 1:
        raise ValueError("context must be at least 1")
    d = cnn_encode(params, params.standardize(x))
    out = np.empty(n)

    def run(idx):
        h, c = zero_carry(cfg, idx.shape[0])
        probs = np.empty(idx.shape)
        for s in range(idx.shape[1]):
            h, c, _ = _lstm_step(wts, d[idx[:, s]], h, c)
            probs[:, s] = sigmoid(h @ wts["out_w"] + wts["out_b"])
        return probs

    head = min(ctx - 1, n)
    if head:
        out[:head] = run(np.arange(head)[None])[0]
    if n >= ctx:
        ends = np.arange(ctx - 1, n)
        idx = ends[:, None] + np.arange(-ctx + 1, 1)[None]
        out[ctx - 1:] = run(idx)[:, -1]
    return out
