"""Minimal dense tensor engine: reverse-mode autodiff, layers, Adam,
checkpoints."""

from . import layers, tensor
from .checkpoint import (CheckpointError, load_blocks, load_checkpoint,
                         load_into, save_checkpoint)
from .optim import Adam, ParameterSet, TrainingDiverged
from .tensor import (Tensor, ShapeMismatch, add, as_tensor, clip, concat, conv2d,
                     cosine_similarity, exp, gather_last, instance_norm2d,
                     layer_norm, log, log_softmax, matmul, mean, minimum, mul,
                     narrow, relu, reshape, sigmoid, softmax, sqrt, sum_, tanh)

__all__ = [
    "Adam", "CheckpointError", "ParameterSet", "ShapeMismatch", "Tensor",
    "TrainingDiverged", "add", "as_tensor", "clip", "concat", "conv2d",
    "cosine_similarity", "exp", "gather_last", "instance_norm2d", "layer_norm",
    "layers", "load_blocks", "load_checkpoint", "load_into", "log",
    "log_softmax", "matmul", "mean", "minimum", "mul", "narrow", "relu",
    "reshape", "save_checkpoint", "sigmoid", "softmax", "sqrt", "sum_",
    "tanh", "tensor",
]
