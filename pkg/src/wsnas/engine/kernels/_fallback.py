"""Numpy implementations of the hot array kernels.

These are the reference/fallback versions; the compiled extension in
_native.pyx implements the same contracts with direct loops.  All functions
take and return contiguous float32 or float64 arrays in NCHW layout and
assume stride-1, same-padding convolutions (the only configuration the
search space uses).
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def _window_view(xp: np.ndarray, kh: int, kw: int, dil: int, H: int, W: int) -> np.ndarray:
    # (B, C, Hp, Wp) padded input -> (B, C, kh, kw, H, W) strided view
    B, C = xp.shape[:2]
    sb, sc, sh, sw = xp.strides
    shape = (B, C, kh, kw, H, W)
    strides = (sb, sc, sh * dil, sw * dil, sh, sw)
    return np.lib.stride_tricks.as_strided(xp, shape=shape, strides=strides)


def conv2d_forward(x: np.ndarray, w: np.ndarray, pad: int, dil: int) -> np.ndarray:
    """x: (B,C,H,W), w: (O,C,kh,kw) -> (B,O,H,W)."""
    B, C, H, W = x.shape
    O, _, kh, kw = w.shape
    if kh == 1 and kw == 1:
        y = np.tensordot(x, w[:, :, 0, 0], axes=([1], [1]))  # (B,H,W,O)
        return np.ascontiguousarray(y.transpose(0, 3, 1, 2))
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = _window_view(xp, kh, kw, dil, H, W)
    y = np.tensordot(cols, w, axes=([1, 2, 3], [1, 2, 3]))  # (B,H,W,O)
    return np.ascontiguousarray(y.transpose(0, 3, 1, 2))


def conv2d_backward(x: np.ndarray, w: np.ndarray, dy: np.ndarray, pad: int,
                    dil: int) -> tuple[np.ndarray, np.ndarray]:
    """Returns (dx, dw) for conv2d_forward."""
    B, C, H, W = x.shape
    O, _, kh, kw = w.shape
    if kh == 1 and kw == 1:
        dw = np.tensordot(dy, x, axes=([0, 2, 3], [0, 2, 3]))[:, :, None, None]
        dx = np.tensordot(dy, w[:, :, 0, 0], axes=([1], [0])).transpose(0, 3, 1, 2)
        return np.ascontiguousarray(dx), np.ascontiguousarray(dw)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = _window_view(xp, kh, kw, dil, H, W)
    # dw[o,c,i,j] = sum_{b,y,x} dy[b,o,y,x] * cols[b,c,i,j,y,x]
    dw = np.tensordot(dy, cols, axes=([0, 2, 3], [0, 4, 5]))
    dxp = np.zeros_like(xp)
    for i in range(kh):
        for j in range(kw):
            # contribution[b,c,y,x] = sum_o dy[b,o,y,x] * w[o,c,i,j]
            contrib = np.tensordot(dy, w[:, :, i, j], axes=([1], [0]))
            dxp[:, :, i * dil:i * dil + H, j * dil:j * dil + W] += \
                contrib.transpose(0, 3, 1, 2)
    dx = dxp[:, :, pad:pad + H, pad:pad + W] if pad else dxp
    return np.ascontiguousarray(dx), np.ascontiguousarray(dw)


def dwconv2d_forward(x: np.ndarray, w: np.ndarray, pad: int, dil: int) -> np.ndarray:
    """Depthwise conv. x: (B,C,H,W), w: (C,kh,kw) -> (B,C,H,W)."""
    B, C, H, W = x.shape
    _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = _window_view(xp, kh, kw, dil, H, W)
    return np.einsum("bcijyx,cij->bcyx", cols, w, optimize=True)


def dwconv2d_backward(x: np.ndarray, w: np.ndarray, dy: np.ndarray, pad: int,
                      dil: int) -> tuple[np.ndarray, np.ndarray]:
    B, C, H, W = x.shape
    _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = _window_view(xp, kh, kw, dil, H, W)
    dw = np.einsum("bcyx,bcijyx->cij", dy, cols, optimize=True)
    dxp = np.zeros_like(xp)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i * dil:i * dil + H, j * dil:j * dil + W] += \
                dy * w[:, i, j][None, :, None, None]
    dx = dxp[:, :, pad:pad + H, pad:pad + W] if pad else dxp
    return np.ascontiguousarray(dx), np.ascontiguousarray(dw)


def maxpool3x3_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """3x3/stride-1/pad-1 max pooling.  Returns (y, argmax in 0..8).

    Ties resolve to the first (row-major) window position, so the backward
    pass routes each gradient to exactly one input element.
    """
    B, C, H, W = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)), constant_values=-np.inf)
    cols = _window_view(xp, 3, 3, 1, H, W)          # (B,C,3,3,H,W)
    flat = cols.reshape(B, C, 9, H, W)
    arg = flat.argmax(axis=2).astype(np.int8)
    y = np.take_along_axis(flat, arg[:, :, None].astype(np.int64), axis=2)[:, :, 0]
    return np.ascontiguousarray(y), arg


def maxpool3x3_backward(arg: np.ndarray, dy: np.ndarray) -> np.ndarray:
    B, C, H, W = dy.shape
    dxp = np.zeros((B, C, H + 2, W + 2), dtype=dy.dtype)
    for idx in range(9):
        i, j = divmod(idx, 3)
        mask = arg == idx
        if mask.any():
            dxp[:, :, i:i + H, j:j + W] += np.where(mask, dy, 0)
    return np.ascontiguousarray(dxp[:, :, 1:1 + H, 1:1 + W])


def bn_stats(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and biased variance over (B, H, W); f64 accumulation."""
    mean = x.mean(axis=(0, 2, 3), dtype=np.float64)
    var = x.var(axis=(0, 2, 3), dtype=np.float64)
    return mean.astype(x.dtype), var.astype(x.dtype)


def bn_apply(x: np.ndarray, mean: np.ndarray, invstd: np.ndarray,
             gamma: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """y = gamma * (x - mean) * invstd + beta, per channel."""
    a = gamma * invstd
    t = beta - mean * a
    return x * a[None, :, None, None] + t[None, :, None, None]


def bn_backward(x: np.ndarray, dy: np.ndarray, mean: np.ndarray,
                invstd: np.ndarray, gamma: np.ndarray
                ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dgamma, dbeta) for train-mode batch normalization."""
    B, C, H, W = x.shape
    n = B * H * W
    xhat = (x - mean[None, :, None, None]) * invstd[None, :, None, None]
    dgamma = np.sum(dy * xhat, axis=(0, 2, 3), dtype=np.float64).astype(x.dtype)
    dbeta = np.sum(dy, axis=(0, 2, 3), dtype=np.float64).astype(x.dtype)
    k1 = (gamma * invstd)[None, :, None, None]
    k2 = (dgamma / np.asarray(n, dtype=x.dtype))[None, :, None, None]
    k3 = (dbeta / np.asarray(n, dtype=x.dtype))[None, :, None, None]
    dx = k1 * (dy - k3 - xhat * k2)
    return dx.astype(x.dtype, copy=False), dgamma, dbeta
