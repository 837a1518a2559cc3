"""Networks for parametrization (PPN) and knot selection (KSN)."""

from parnet.neural.layers import (
    approximation_layer,
    approximation_layer_backward,
    ksn_head,
    ppn_head,
)
from parnet.neural.mlp import AdamState, Mlp, adam_step, relu, sigmoid, softplus
from parnet.neural.models import (
    ConstantKnotSelector,
    KnotSelector,
    PointParametrizer,
    ksn_features,
    load_estimator,
    save_estimator,
    train_ksn,
    train_ppn,
)
from parnet.neural.serialization import load_model, save_model

__all__ = [
    "AdamState", "ConstantKnotSelector", "KnotSelector", "Mlp", "PointParametrizer",
    "adam_step", "approximation_layer", "approximation_layer_backward", "ksn_features",
    "ksn_head", "load_estimator", "load_model", "ppn_head", "relu", "save_estimator",
    "save_model", "sigmoid", "softplus", "train_ksn", "train_ppn",
]
