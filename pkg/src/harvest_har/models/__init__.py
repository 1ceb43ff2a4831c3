"""Window classifiers: naive Bayes + MLP ensemble and the recurrent CNN."""
from .adam import AdamState, adam_step
from .ensemble import EnsembleParams, ensemble_components, ensemble_predict
from .gnb import GnbParams, TrainingError, gnb_fit, gnb_log_joint, gnb_predict
from .mlp import MlpConfig, mlp_forward, mlp_grad, mlp_init, mlp_loss
from .rcnn import (
    RcnnConfig,
    RcnnParams,
    rcnn_forward,
    rcnn_grad,
    rcnn_init,
    rcnn_predict_series,
    rcnn_sequence_probs,
    rcnn_zeros,
)
from .serialize import ModelFormatError, load_model, model_kind, save_model
from .training import MODEL_KINDS, TrainResult, train, train_ensemble, train_mlp, train_rcnn

__all__ = [
    "AdamState", "adam_step", "EnsembleParams", "ensemble_components", "ensemble_predict",
    "GnbParams", "TrainingError", "gnb_fit", "gnb_log_joint", "gnb_predict",
    "MlpConfig", "mlp_forward", "mlp_grad", "mlp_init", "mlp_loss",
    "RcnnConfig", "RcnnParams", "rcnn_forward", "rcnn_grad", "rcnn_init",
    "rcnn_predict_series", "rcnn_sequence_probs", "rcnn_zeros",
    "ModelFormatError", "load_model", "model_kind", "save_model",
    "MODEL_KINDS", "TrainResult", "train", "train_ensemble", "train_mlp", "train_rcnn",
]
