"""Deterministic dense-tensor forward/backward engine with SGD."""

from .loss import accuracy, softmax_cross_entropy
from .network import BoundNetwork, bind_network
from .optim import OptimizerConfig, cosine_lr, sgd_step
from .params import Slot
from .rng import mix_seed, seeded_generator

__all__ = [
    "BoundNetwork", "OptimizerConfig", "Slot", "accuracy", "bind_network",
    "cosine_lr", "mix_seed", "seeded_generator", "sgd_step",
    "softmax_cross_entropy",
]
