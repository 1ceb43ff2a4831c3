"""Single-hidden-layer tanh network with a sigmoid output."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..preprocess import ConfigError


@dataclass(frozen=True)
class MlpConfig:
    hidden: int = 512
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.hidden < 1 or self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("hidden, epochs and batch_size must be positive")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")


PARAM_NAMES = ("w_hidden", "b_hidden", "w_out", "b_out")


def mlp_init(n_in: int, hidden: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    lim_h = np.sqrt(6.0 / (n_in + hidden))
    lim_o = np.sqrt(6.0 / (hidden + 1))
    return {
        "w_hidden": rng.uniform(-lim_h, lim_h, size=(n_in, hidden)),
        "b_hidden": np.zeros(hidden),
        "w_out": rng.uniform(-lim_o, lim_o, size=hidden),
        "b_out": np.zeros(()),
    }


def _check(params, x):
    if x.shape[-1] != params["w_hidden"].shape[0]:
        raise ValueError(f"input has {x.shape[-1]} features, network expects {params['w_hidden'].shape[0]}")


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def mlp_forward(params: dict[str, np.ndarray], x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    _check(params, x)
    h = np.tanh(x @ params["w_hidden"] + params["b_hidden"])
    return sigmoid(h @ params["w_out"] + params["b_out"])


def bce(p, y):
    p = np.clip(p, 1e-12, 1 - 1e-12)
    return -(y * np.log(p) + (1 - y) * np.log(1 - p))


def mlp_loss(params, x, y) -> float:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    h = np.tanh(x @ params["w_hidden"] + params["b_hidden"])
    z = h @ params["w_out"] + params["b_out"]
    # logits form of the binary cross-entropy; stable for large |z|
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def mlp_grad(params, x, y) -> tuple[float, dict[str, np.ndarray]]:
    """Mean binary cross-entropy and its exact gradient."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    _check(params, x)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = x.shape[0]
    a = x @ params["w_hidden"] + params["b_hidden"]
    h = np.tanh(a)
    z = h @ params["w_out"] + params["b_out"]
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    dz = (sigmoid(z) - y) / n
    da = np.outer(dz, params["w_out"]) * (1.0 - h * h)
    grads = {
        "w_hidden": x.T @ da,
        "b_hidden": da.sum(axis=0),
        "w_out": h.T @ dz,
        "b_out": np.asarray(dz.sum()),
    }
    return loss, grads
