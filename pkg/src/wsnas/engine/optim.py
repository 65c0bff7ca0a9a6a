"""SGD with momentum, weight decay, and the cosine learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from ..errors import ContractError, DomainError
from .params import Slot


@dataclass(frozen=True)
class OptimizerConfig:
    lr_max: float = 0.025
    lr_min: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 1e-3
    total_epochs: int = 200

    def __post_init__(self):
        if not 0 <= self.lr_min <= self.lr_max:
            raise DomainError("need 0 <= lr_min <= lr_max")
        if not 0 <= self.momentum < 1:
            raise DomainError("momentum must lie in [0, 1)")
        if self.total_epochs <= 0:
            raise DomainError("total_epochs must be positive")


def cosine_lr(epoch: int, cfg: OptimizerConfig) -> float:
    """Cosine annealing without restarts, evaluated once per epoch."""
    if not 0 <= epoch <= cfg.total_epochs:
        raise DomainError(f"epoch {epoch} outside [0, {cfg.total_epochs}]")
    span = cfg.lr_max - cfg.lr_min
    return cfg.lr_min + 0.5 * span * (1.0 + math.cos(math.pi * epoch / cfg.total_epochs))


def sgd_step(slots: Iterable[Slot], lr: float, cfg: OptimizerConfig) -> None:
    """v <- momentum*v + (grad + wd*value); value <- value - lr*v.

    Mutates exactly the given slots (values and velocities) in place.
    """
    for slot in slots:
        if not slot.trainable:
            continue
        if slot.grad is None:
            raise ContractError(f"slot {slot.slot_id} has no populated gradient")
        v = slot.velocity
        v *= cfg.momentum
        v += slot.grad
        if cfg.weight_decay:
            v += cfg.weight_decay * slot.value
        slot.value -= lr * v
