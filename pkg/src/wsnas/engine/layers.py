"""Layer objects binding storage slots to forward/backward compute.

Each layer caches whatever its backward pass needs during forward and
accumulates parameter gradients into its slots' grad arrays.  Layers are
rebound cheaply per child; the arrays they reference are mutated in place by
the optimizer, so bindings stay valid across training steps.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError, ShapeError
from . import kernels
from .params import Slot


class Conv2d:
    def __init__(self, weight: Slot, pad: int = 0, dilation: int = 1):
        self.weight = weight
        self.pad = pad
        self.dilation = dilation
        self._x = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        if x.shape[1] != self.weight.value.shape[1]:
            raise ShapeError(f"conv expects {self.weight.value.shape[1]} input channels, "
                             f"got {x.shape[1]}")
        self._x = x if train else None
        return kernels.conv2d_forward(x, self.weight.value, self.pad, self.dilation)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dx, dw = kernels.conv2d_backward(self._x, self.weight.value, dy,
                                         self.pad, self.dilation)
        self.weight.grad += dw
        return dx


class DepthwiseConv2d:
    def __init__(self, weight: Slot, pad: int, dilation: int):
        self.weight = weight
        self.pad = pad
        self.dilation = dilation
        self._x = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        self._x = x if train else None
        return kernels.dwconv2d_forward(x, self.weight.value, self.pad, self.dilation)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dx, dw = kernels.dwconv2d_backward(self._x, self.weight.value, dy,
                                           self.pad, self.dilation)
        self.weight.grad += dw
        return dx


class BatchNorm2d:
    """Per-channel batch normalization with shared running statistics.

    Running stats follow new = (1 - momentum) * old + momentum * batch_stat,
    using the biased (population) batch variance for both normalization and
    the running update.  Train-mode forward normalizes by batch statistics;
    eval mode reads the running buffers and mutates nothing.
    """

    def __init__(self, gamma: Slot, beta: Slot, running_mean: Slot,
                 running_var: Slot, momentum: float, eps: float):
        self.gamma = gamma
        self.beta = beta
        self.running_mean = running_mean
        self.running_var = running_var
        self.momentum = momentum
        self.eps = eps
        self._cache = None

    def forward(self, x: np.ndarray, train: bool, update_running: bool | None = None) -> np.ndarray:
        if train:
            mean, var = kernels.bn_stats(x)
            if update_running is None or update_running:
                m = self.momentum
                self.running_mean.value[...] = (1 - m) * self.running_mean.value + m * mean
                self.running_var.value[...] = (1 - m) * self.running_var.value + m * var
            invstd = (1.0 / np.sqrt(var + self.eps)).astype(x.dtype)
            self._cache = (x, mean, invstd)
        else:
            mean = self.running_mean.value
            invstd = (1.0 / np.sqrt(self.running_var.value + self.eps)).astype(x.dtype)
            self._cache = None
        return kernels.bn_apply(x, mean, invstd, self.gamma.value, self.beta.value)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise ContractError("BatchNorm backward requires a train-mode forward")
        x, mean, invstd = self._cache
        dx, dgamma, dbeta = kernels.bn_backward(x, dy, mean, invstd, self.gamma.value)
        self.gamma.grad += dgamma
        self.beta.grad += dbeta
        return dx


class MaxPool3x3:
    def __init__(self):
        self._arg = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        y, arg = kernels.maxpool3x3_forward(x)
        self._arg = arg if train else None
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return kernels.maxpool3x3_backward(self._arg, dy)


class ReLU:
    def __init__(self):
        self._mask = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        y = np.maximum(x, 0)
        self._mask = x > 0 if train else None
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy * self._mask


class GlobalAvgPool:
    def __init__(self):
        self._hw = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        self._hw = x.shape[2:]
        return x.mean(axis=(2, 3))

    def backward(self, dy: np.ndarray) -> np.ndarray:
        h, w = self._hw
        scale = dy.dtype.type(1.0 / (h * w))
        return np.broadcast_to((dy * scale)[:, :, None, None],
                               dy.shape + (h, w)).copy()


class Linear:
    def __init__(self, weight: Slot, bias: Slot):
        self.weight = weight
        self.bias = bias
        self._x = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        self._x = x if train else None
        return x @ self.weight.value.T + self.bias.value

    def backward(self, dy: np.ndarray) -> np.ndarray:
        self.weight.grad += dy.T @ self._x
        self.bias.grad += dy.sum(axis=0)
        return dy @ self.weight.value
