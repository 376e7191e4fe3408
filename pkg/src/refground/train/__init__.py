from .matching import Assignment, hungarian, match_cost
from .losses import LossBreakdown, SampleTarget, compute_losses, bce, dice_loss
from .optim import Adam, lr_at_epoch

__all__ = [
    "Assignment",
    "hungarian",
    "match_cost",
    "LossBreakdown",
    "SampleTarget",
    "compute_losses",
    "bce",
    "dice_loss",
    "Adam",
    "lr_at_epoch",
]
