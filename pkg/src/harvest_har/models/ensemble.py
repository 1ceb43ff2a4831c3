"""Weighted vote of naive Bayes and the MLP over window features."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gnb import GnbParams, gnb_predict
from .mlp import mlp_forward

WEIGHT_NB = 0.6
WEIGHT_MLP = 0.4


@dataclass(frozen=True)
class EnsembleParams:
    gnb: GnbParams
    mlp: dict[str, np.ndarray]
    feature_mean: np.ndarray
    feature_std: np.ndarray
    weight_nb: float = WEIGHT_NB
    weight_mlp: float = WEIGHT_MLP

    def __post_init__(self):
        if not (self.weight_nb > 0 and self.weight_mlp > 0):
            raise ValueError("ensemble weights must be positive")
        if abs(self.weight_nb + self.weight_mlp - 1.0) > 1e-12:
            raise ValueError("ensemble weights must sum to 1")


def standardize(x, mean, std) -> np.ndarray:
    return (np.asarray(x, dtype=np.float64) - mean) / std


def fit_standardizer(x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    std = x.std(axis=0)
    return x.mean(axis=0), np.where(std > 0, std, 1.0)


def combine(p_nb, p_mlp, weight_nb: float = WEIGHT_NB, weight_mlp: float = WEIGHT_MLP):
    return weight_nb * np.asarray(p_nb) + weight_mlp * np.asarray(p_mlp)


def ensemble_components(params: EnsembleParams, x) -> tuple[np.ndarray, np.ndarray]:
    """Naive Bayes and MLP probabilities for a ``(n, d)`` feature matrix."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    p_nb = np.atleast_1d(gnb_predict(params.gnb, x))
    p_mlp = mlp_forward(params.mlp, standardize(x, params.feature_mean, params.feature_std))
    return p_nb, p_mlp


def ensemble_predict(params: EnsembleParams, x):
    p_nb, p_mlp = ensemble_components(params, x)
    p = combine(p_nb, p_mlp, params.weight_nb, params.weight_mlp)
    return float(p[0]) if np.ndim(x) == 1 else p
