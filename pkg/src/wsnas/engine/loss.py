"""Softmax cross-entropy loss and accuracy."""

from __future__ import annotations

import numpy as np

from ..errors import DomainError, NumericFault


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy.  Returns (loss, dloss/dlogits)."""
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise DomainError("labels must lie in [0, num_classes)")
    b = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    probs = exps / exps.sum(axis=1, keepdims=True)
    picked = probs[np.arange(b), labels]
    loss = float(-np.log(np.maximum(picked, np.finfo(probs.dtype).tiny)).mean())
    if not np.isfinite(loss):
        raise NumericFault(f"non-finite loss {loss}")
    dlogits = probs.copy()
    dlogits[np.arange(b), labels] -= 1
    dlogits /= b
    return loss, dlogits.astype(logits.dtype, copy=False)


def accuracy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Top-1 accuracy; argmax ties resolve to the lowest class index."""
    return float((logits.argmax(axis=1) == labels).mean())
