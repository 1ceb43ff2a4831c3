"""Gaussian naive Bayes with maximum-likelihood parameters."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VAR_FLOOR = 1e-9


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class GnbParams:
    priors: np.ndarray  # (2,)
    means: np.ndarray  # (2, D)
    variances: np.ndarray  # (2, D)


def gnb_fit(features, labels, var_floor: float = VAR_FLOOR) -> GnbParams:
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels).astype(int)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError("features must be (n, d) with one label per row")
    if not (np.any(y == 0) and np.any(y == 1)):
        raise TrainingError("naive Bayes needs both classes in the training data")
    priors = np.array([np.mean(y == 0), np.mean(y == 1)])
    means = np.stack([x[y == c].mean(axis=0) for c in (0, 1)])
    variances = np.stack([x[y == c].var(axis=0) for c in (0, 1)])
    return GnbParams(priors, means, np.maximum(variances, var_floor))


def gnb_log_joint(params: GnbParams, x) -> np.ndarray:
    """``log p(c) + sum_d log N(x_d | mu_cd, var_cd)`` for both classes, shape ``(n, 2)``."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    out = np.empty((x.shape[0], 2))
    for c in (0, 1):
        var = params.variances[c]
        ll = -0.5 * (np.log(2 * np.pi * var) + (x - params.means[c]) ** 2 / var)
        out[:, c] = np.log(params.priors[c]) + ll.sum(axis=1)
    return out


def gnb_predict(params: GnbParams, x) -> np.ndarray | float:
    """Posterior probability of the event class."""
    lj = gnb_log_joint(params, x)
    # two-class softmax written as a logistic of the log-odds
    p = 1.0 / (1.0 + np.exp(np.clip(lj[:, 0] - lj[:, 1], -745.0, 709.0)))
    return float(p[0]) if np.ndim(x) == 1 else p
