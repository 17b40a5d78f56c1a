"""Stacked multichannel autoencoder: training, transformation and evaluation helpers."""

from ._smcae import (
    HogConfig,
    Model,
    TrainConfig,
    __version__,
    f1_score,
    gradcheck,
    hog,
    load_model,
    load_optdigits,
    rank1,
    roc_auc,
    svm_fit_predict,
    train,
    transform,
)

__all__ = [
    "HogConfig",
    "Model",
    "TrainConfig",
    "__version__",
    "f1_score",
    "gradcheck",
    "hog",
    "load_model",
    "load_optdigits",
    "rank1",
    "roc_auc",
    "svm_fit_predict",
    "train",
    "transform",
]
