"""Seeded mini-batch training loops for both model kinds."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adam import AdamState, adam_step
from .ensemble import EnsembleParams, fit_standardizer, standardize
from .gnb import TrainingError, gnb_fit
from .mlp import MlpConfig, mlp_grad, mlp_init
from .rcnn import RcnnConfig, RcnnParams, channel_stats, rcnn_grad, rcnn_init

MODEL_KINDS = ("ensemble", "rcnn")


@dataclass(frozen=True)
class TrainResult:
    params: object
    loss_trace: np.ndarray  # mean training loss per epoch


def _check_targets(targets) -> np.ndarray:
    y = np.asarray(targets, dtype=np.float64)
    if y.ndim != 1 or y.size == 0:
        raise TrainingError("need a non-empty 1-D target vector")
    if np.any((y < 0) | (y > 1)):
        raise TrainingError("targets must lie in [0, 1]")
    cls = y >= 0.5
    if cls.all() or not cls.any():
        raise TrainingError("training set contains a single class")
    return y


def train_mlp(x, y, cfg: MlpConfig, params=None) -> TrainResult:
    """ADAM on mean binary cross-entropy; ``x`` should already be standardized."""
    rng = np.random.default_rng(cfg.seed)
    if params is None:
        params = mlp_init(x.shape[1], cfg.hidden, rng)
    state = AdamState(lr=cfg.lr)
    n = x.shape[0]
    trace = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            loss, grads = mlp_grad(params, x[idx], y[idx])
            params, state = adam_step(params, grads, state)
            total += loss * idx.size
        trace.append(total / n)
    return TrainResult(params, np.array(trace))


def train_ensemble(features, targets, cfg: MlpConfig = MlpConfig(),
                   weight_nb: float = 0.6) -> TrainResult:
    """Naive Bayes on thresholded labels plus an MLP on fractional targets."""
    x = np.asarray(features, dtype=np.float64)
    y = _check_targets(targets)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError("features must be (n, d) with one target per row")
    gnb = gnb_fit(x, (y >= 0.5).astype(int))
    mean, std = fit_standardizer(x)
    res = train_mlp(standardize(x, mean, std), y, cfg)
    params = EnsembleParams(gnb, res.params, mean, std, weight_nb, 1.0 - weight_nb)
    return TrainResult(params, res.loss_trace)


def subsequences(n_windows: int, length: int, offset: int = 0) -> np.ndarray:
    """Start indices of full blocks of ``length`` windows on a grid shifted by ``offset``."""
    if n_windows < length:
        return np.zeros(0, dtype=int)
    offset = offset % length
    if n_windows - offset < length:
        offset = 0
    return np.arange(offset, n_windows - length + 1, length)


def train_rcnn(tensor, targets, cfg: RcnnConfig = RcnnConfig()) -> TrainResult:
    """Truncated-BPTT training over contiguous sub-sequences of windows.

    Each epoch shifts the block grid by a random offset so that every window
    is eventually seen at several positions within a block. The LSTM carry
    is reset at the start of every block. Inputs are standardized per channel
    with statistics of the training windows, stored in the returned params.
    """
    x = np.asarray(tensor, dtype=np.float64)
    y = _check_targets(targets)
    if x.ndim != 3 or x.shape[0] != y.shape[0]:
        raise ValueError("tensor must be (W, C, L) with one target per window")
    t = min(cfg.truncation, x.shape[0])
    rng = np.random.default_rng(cfg.seed)
    params: RcnnParams = rcnn_init(cfg, rng, *channel_stats(x))
    weights = params.weights
    state = AdamState(lr=cfg.lr)
    trace = []
    for _ in range(cfg.epochs):
        starts = subsequences(x.shape[0], t, int(rng.integers(t)))
        starts = starts[rng.permutation(starts.size)]
        total, count = 0.0, 0
        for s in range(0, starts.size, cfg.batch_size):
            blk = starts[s:s + cfg.batch_size]
            idx = blk[:, None] + np.arange(t)[None]
            loss, grads = rcnn_grad(params.with_weights(weights), x[idx], y[idx])
            weights, state = adam_step(weights, grads, state)
            total += loss * idx.size
            count += idx.size
        trace.append(total / count)
    return TrainResult(params.with_weights(weights), np.array(trace))


def train(kind: str, windows, targets, config=None, features=None) -> TrainResult:
    """Dispatch on model kind.

    ``windows`` is the ``(W, C, L)`` window stack. For the ensemble the
    32-value feature matrix is computed from it unless ``features`` is given.
    """
    if kind == "ensemble":
        if features is None:
            from ..features import extract_batch
            features = extract_batch(windows)
        return train_ensemble(features, targets, config or MlpConfig())
    if kind == "rcnn":
        return train_rcnn(windows, targets, config or RcnnConfig())
    raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
