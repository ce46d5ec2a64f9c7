from . import autodiff
from .autodiff import Tensor, backward, param
from .losses import (
    LossBreakdown,
    gaussian_weights,
    loss_gau,
    loss_half,
    loss_reg,
    loss_sin,
    loss_val,
)
from .optim import OptimizerState, adamw_step, cosine_lr

__all__ = [
    "Tensor",
    "autodiff",
    "backward",
    "param",
    "LossBreakdown",
    "gaussian_weights",
    "loss_gau",
    "loss_half",
    "loss_reg",
    "loss_sin",
    "loss_val",
    "OptimizerState",
    "adamw_step",
    "cosine_lr",
]
