from gestalt.nn.checkpoint import CHECKPOINT_FORMAT_VERSION, load_checkpoint, save_checkpoint
from gestalt.nn.functional import (
    batchnorm_backward,
    batchnorm_forward,
    conv2d_backward,
    conv2d_forward,
    dropout_backward,
    dropout_forward,
    fc_backward,
    fc_forward,
    pool2d_backward,
    pool2d_forward,
    relu,
    relu_backward,
    relu_forward,
    softmax,
    softmax_cross_entropy,
)
from gestalt.nn.init import init_he_normal, init_xavier_modified
from gestalt.nn.layers import LAYER_REGISTRY, Layer, LayerSpec, register_layer
from gestalt.nn.network import Network, check_finite
from gestalt.nn.optim import OptimizerState, optimizer_step

__all__ = [
    "CHECKPOINT_FORMAT_VERSION",
    "LAYER_REGISTRY",
    "Layer",
    "LayerSpec",
    "Network",
    "OptimizerState",
    "batchnorm_backward",
    "batchnorm_forward",
    "check_finite",
    "conv2d_backward",
    "conv2d_forward",
    "dropout_backward",
    "dropout_forward",
    "fc_backward",
    "fc_forward",
    "init_he_normal",
    "init_xavier_modified",
    "load_checkpoint",
    "optimizer_step",
    "pool2d_backward",
    "pool2d_forward",
    "register_layer",
    "relu",
    "relu_backward",
    "relu_forward",
    "save_checkpoint",
    "softmax",
    "softmax_cross_entropy",
]
