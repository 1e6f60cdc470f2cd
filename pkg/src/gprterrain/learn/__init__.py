"""A small float64 layer engine with explicit backward passes."""
from .checkpoint import CheckpointError, CheckpointHeader, assign_parameters, load_checkpoint, save_checkpoint
from .gradcheck import GradientCheckError, grad_check, grad_check_loss
from .layers import (
    Conv1d,
    Conv2d,
    Dense,
    Flatten,
    Layer,
    MaxPool1d,
    MaxPool2d,
    Parameter,
    ReLU,
    Reshape,
    Sequential,
    ShapeError,
    Softmax,
    Upsample2d,
    softmax,
)
from .losses import (
    DomainError,
    clustering_loss,
    cross_entropy,
    kl_divergence,
    mse_reconstruction,
    reparameterize,
    soft_assignments,
    target_distribution,
)
from .optim import Adam, TrainingError, adam_step

__all__ = [
    "Adam", "CheckpointError", "CheckpointHeader", "assign_parameters", "Conv1d", "Conv2d", "Dense", "DomainError",
    "Flatten", "GradientCheckError", "Layer", "MaxPool1d", "MaxPool2d", "Parameter", "ReLU",
    "Reshape", "Sequential", "ShapeError", "Softmax", "TrainingError", "Upsample2d", "adam_step",
    "clustering_loss", "cross_entropy", "grad_check", "grad_check_loss", "kl_divergence",
    "load_checkpoint", "mse_reconstruction", "reparameterize", "save_checkpoint", "soft_assignments",
    "softmax", "target_distribution",
]
