from .layers import (
    Conv2d,
    Linear,
    MaxPool2,
    Module,
    Param,
    ReLU,
    ResidualModule,
    Sequential,
    UpsampleNearest2,
    he_uniform,
)
from .optim import SGD, Adam, Optimizer, make_optimizer
from .resize import bilinear_resize

__all__ = [
    "Adam", "Conv2d", "Linear", "MaxPool2", "Module", "Optimizer", "Param",
    "ReLU", "ResidualModule", "SGD", "Sequential", "UpsampleNearest2",
    "bilinear_resize", "he_uniform", "make_optimizer",
]
