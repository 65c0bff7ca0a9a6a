"""Central finite-difference oracle for the analytic gradients."""

from __future__ import annotations

import numpy as np

from ..errors import ContractError, DomainError
from .loss import softmax_cross_entropy
from .network import BoundNetwork


def gradient_check(net: BoundNetwork, batch: np.ndarray, labels: np.ndarray,
                   eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Perturbs every scalar parameter twice, so cost is ~2 forwards per scalar;
    intended for toy-sized networks in 64-bit mode.  Running statistics are
    frozen so the loss is a pure function of the parameters.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    if batch.dtype != np.float64:
        raise ContractError("gradient_check requires a 64-bit network and batch")

    net.zero_grads()
    logits = net.forward(batch, train=True, update_running=False)
    loss0, dlogits = softmax_cross_entropy(logits, labels)
    net.backward(dlogits)
    analytic = {s.slot_id: s.grad.copy() for s in net.param_slots}

    def loss_at() -> float:
        logits = net.forward(batch, train=True, update_running=False)
        return softmax_cross_entropy(logits, labels)[0]

    worst = 0.0
    for slot in net.param_slots:
        if slot.value.dtype != np.float64:
            raise ContractError("gradient_check requires float64 parameters")
        flat = slot.value.reshape(-1)
        an = analytic[slot.slot_id].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_at()
            flat[i] = orig - eps
            down = loss_at()
            flat[i] = orig
            fd = (up - down) / (2 * eps)
            denom = max(abs(fd), abs(an[i]), 1e-8)
            worst = max(worst, abs(fd - an[i]) / denom)
    return worst
