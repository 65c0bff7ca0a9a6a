# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled loop kernels for the convolution/batchnorm/pooling hot paths.

Same contracts as _fallback.py: NCHW float32/float64 contiguous arrays,
stride 1, symmetric same-padding handled by bounds checks (no materialized
padding), dilation for the dilated separable op.  Inner loops run over
contiguous rows through raw pointers so the compiler can vectorize them.
"""

import numpy as np

cimport cython

ctypedef fused floating:
    float
    double

BACKEND = "cython"


cdef inline object _empty(floating v, shape):
    # dtype-matched allocation helper (fused-type dispatch)
    if floating is float:
        return np.zeros(shape, dtype=np.float32)
    return np.zeros(shape, dtype=np.float64)


def conv2d_forward(floating[:, :, :, ::1] x, floating[:, :, :, ::1] w,
                   int pad, int dil):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t O = w.shape[0], KH = w.shape[2], KW = w.shape[3]
    if W > 512:
        raise ValueError("image width above 512 is not supported")
    out_np = _empty(<floating>0, (B, O, H, W))
    cdef floating[:, :, :, ::1] out = out_np
    cdef Py_ssize_t b, o, c, ky, kx, y, i, oy, ox, iy, x0, x1
    cdef floating wv
    cdef floating buf[512]
    cdef floating *orow
    cdef floating *xrow
    with nogil:
        for b in range(B):
            for o in range(O):
                for y in range(H):
                    for i in range(W):
                        buf[i] = 0
                    for c in range(C):
                        for ky in range(KH):
                            iy = y + ky * dil - pad
                            if iy < 0 or iy >= H:
                                continue
                            for kx in range(KW):
                                ox = kx * dil - pad
                                x0 = -ox if ox < 0 else 0
                                x1 = W - ox if ox > 0 else W
                                wv = w[o, c, ky, kx]
                                xrow = &x[b, c, iy, ox]
                                for i in range(x0, x1):
                                    buf[i] += wv * xrow[i]
                    orow = &out[b, o, y, 0]
                    for i in range(W):
                        orow[i] = buf[i]
    return out_np


def conv2d_backward(floating[:, :, :, ::1] x, floating[:, :, :, ::1] w,
                    floating[:, :, :, ::1] dy, int pad, int dil):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t O = w.shape[0], KH = w.shape[2], KW = w.shape[3]
    if W > 512:
        raise ValueError("image width above 512 is not supported")
    dx_np = _empty(<floating>0, (B, C, H, W))
    dw_np = _empty(<floating>0, (O, C, KH, KW))
    cdef floating[:, :, :, ::1] dx = dx_np
    cdef floating[:, :, :, ::1] dw = dw_np
    cdef Py_ssize_t b, o, c, ky, kx, y, i, oy, ox, iy, x0, x1
    cdef floating wv, acc
    cdef floating buf[512]
    cdef floating *row
    cdef floating *xrow
    cdef floating *grow
    with nogil:
        # dx[b,c,iy,ix] += w[o,c,ky,kx] * dy[b,o,iy-oy,ix-ox]
        for b in range(B):
            for c in range(C):
                for iy in range(H):
                    for i in range(W):
                        buf[i] = 0
                    for o in range(O):
                        for ky in range(KH):
                            y = iy - (ky * dil - pad)
                            if y < 0 or y >= H:
                                continue
                            for kx in range(KW):
                                ox = kx * dil - pad
                                x0 = ox if ox > 0 else 0
                                x1 = W + ox if ox < 0 else W
                                wv = w[o, c, ky, kx]
                                grow = &dy[b, o, y, 0] - ox
                                for i in range(x0, x1):
                                    buf[i] += wv * grow[i]
                    row = &dx[b, c, iy, 0]
                    for i in range(W):
                        row[i] = buf[i]
        # dw[o,c,ky,kx] = sum_{b,y,x} dy[b,o,y,x] * x[b,c,y+oy,x+ox]
        for o in range(O):
            for c in range(C):
                for ky in range(KH):
                    oy = ky * dil - pad
                    for kx in range(KW):
                        ox = kx * dil - pad
                        x0 = -ox if ox < 0 else 0
                        x1 = W - ox if ox > 0 else W
                        acc = 0
                        for b in range(B):
                            for y in range(H):
                                iy = y + oy
                                if iy < 0 or iy >= H:
                                    continue
                                grow = &dy[b, o, y, 0]
                                xrow = &x[b, c, iy, ox]
                                for i in range(x0, x1):
                                    acc += grow[i] * xrow[i]
                        dw[o, c, ky, kx] = acc
    return dx_np, dw_np


def dwconv2d_forward(floating[:, :, :, ::1] x, floating[:, :, ::1] w,
                     int pad, int dil):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t KH = w.shape[1], KW = w.shape[2]
    if W > 512:
        raise ValueError("image width above 512 is not supported")
    out_np = _empty(<floating>0, (B, C, H, W))
    cdef floating[:, :, :, ::1] out = out_np
    cdef Py_ssize_t b, c, ky, kx, y, i, ox, iy, x0, x1
    cdef floating wv
    cdef floating buf[512]
    cdef floating *orow
    cdef floating *xrow
    with nogil:
        for b in range(B):
            for c in range(C):
                for y in range(H):
                    for i in range(W):
                        buf[i] = 0
                    for ky in range(KH):
                        iy = y + ky * dil - pad
                        if iy < 0 or iy >= H:
                            continue
                        for kx in range(KW):
                            ox = kx * dil - pad
                            x0 = -ox if ox < 0 else 0
                            x1 = W - ox if ox > 0 else W
                            wv = w[c, ky, kx]
                            xrow = &x[b, c, iy, ox]
                            for i in range(x0, x1):
                                buf[i] += wv * xrow[i]
                    orow = &out[b, c, y, 0]
                    for i in range(W):
                        orow[i] = buf[i]
    return out_np


def dwconv2d_backward(floating[:, :, :, ::1] x, floating[:, :, ::1] w,
                      floating[:, :, :, ::1] dy, int pad, int dil):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t KH = w.shape[1], KW = w.shape[2]
    if W > 512:
        raise ValueError("image width above 512 is not supported")
    dx_np = _empty(<floating>0, (B, C, H, W))
    dw_np = _empty(<floating>0, (C, KH, KW))
    cdef floating[:, :, :, ::1] dx = dx_np
    cdef floating[:, :, ::1] dw = dw_np
    cdef Py_ssize_t b, c, ky, kx, y, i, oy, ox, iy, x0, x1
    cdef floating wv, acc
    cdef floating buf[512]
    cdef floating *row
    cdef floating *xrow
    cdef floating *grow
    with nogil:
        for b in range(B):
            for c in range(C):
                for iy in range(H):
                    for i in range(W):
                        buf[i] = 0
                    for ky in range(KH):
                        y = iy - (ky * dil - pad)
                        if y < 0 or y >= H:
                            continue
                        for kx in range(KW):
                            ox = kx * dil - pad
                            x0 = ox if ox > 0 else 0
                            x1 = W + ox if ox < 0 else W
                            wv = w[c, ky, kx]
                            grow = &dy[b, c, y, 0] - ox
                            for i in range(x0, x1):
                                buf[i] += wv * grow[i]
                    row = &dx[b, c, iy, 0]
                    for i in range(W):
                        row[i] = buf[i]
        for c in range(C):
            for ky in range(KH):
                oy = ky * dil - pad
                for kx in range(KW):
                    ox = kx * dil - pad
                    x0 = -ox if ox < 0 else 0
                    x1 = W - ox if ox > 0 else W
                    acc = 0
                    for b in range(B):
                        for y in range(H):
                            iy = y + oy
                            if iy < 0 or iy >= H:
                                continue
                            grow = &dy[b, c, y, 0]
                            xrow = &x[b, c, iy, ox]
                            for i in range(x0, x1):
                                acc += grow[i] * xrow[i]
                    dw[c, ky, kx] = acc
    return dx_np, dw_np


def maxpool3x3_forward(floating[:, :, :, ::1] x):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    if floating is float:
        out_np = np.empty((B, C, H, W), dtype=np.float32)
    else:
        out_np = np.empty((B, C, H, W), dtype=np.float64)
    arg_np = np.zeros((B, C, H, W), dtype=np.int8)
    cdef floating[:, :, :, ::1] out = out_np
    cdef signed char[:, :, :, ::1] arg = arg_np
    cdef Py_ssize_t b, c, y, xx, ky, kx, iy, ix
    cdef floating best, v
    cdef signed char bidx, idx
    with nogil:
        for b in range(B):
            for c in range(C):
                for y in range(H):
                    for xx in range(W):
                        bidx = -1
                        best = 0
                        idx = 0
                        for ky in range(3):
                            iy = y + ky - 1
                            for kx in range(3):
                                ix = xx + kx - 1
                                if 0 <= iy < H and 0 <= ix < W:
                                    v = x[b, c, iy, ix]
                                    if bidx < 0 or v > best:
                                        best = v
                                        bidx = idx
                                idx += 1
                        out[b, c, y, xx] = best
                        arg[b, c, y, xx] = bidx
    return out_np, arg_np


def maxpool3x3_backward(signed char[:, :, :, ::1] arg, floating[:, :, :, ::1] dy):
    cdef Py_ssize_t B = dy.shape[0], C = dy.shape[1], H = dy.shape[2], W = dy.shape[3]
    dx_np = _empty(<floating>0, (B, C, H, W))
    cdef floating[:, :, :, ::1] dx = dx_np
    cdef Py_ssize_t b, c, y, xx, iy, ix
    cdef signed char a
    with nogil:
        for b in range(B):
            for c in range(C):
                for y in range(H):
                    for xx in range(W):
                        a = arg[b, c, y, xx]
                        iy = y + (a // 3) - 1
                        ix = xx + (a % 3) - 1
                        dx[b, c, iy, ix] += dy[b, c, y, xx]
    return dx_np


def bn_stats(floating[:, :, :, ::1] x):
    """Per-channel mean and biased variance over (B, H, W); f64 accumulation."""
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], HW = x.shape[2] * x.shape[3]
    mean_np = _empty(<floating>0, (C,))
    var_np = _empty(<floating>0, (C,))
    cdef floating[::1] mean = mean_np
    cdef floating[::1] var = var_np
    cdef Py_ssize_t b, c, i
    cdef double s, ss, m, d
    cdef floating *row
    with nogil:
        for c in range(C):
            s = 0
            for b in range(B):
                row = &x[b, c, 0, 0]
                for i in range(HW):
                    s += row[i]
            m = s / (B * HW)
            ss = 0
            for b in range(B):
                row = &x[b, c, 0, 0]
                for i in range(HW):
                    d = row[i] - m
                    ss += d * d
            mean[c] = <floating>m
            var[c] = <floating>(ss / (B * HW))
    return mean_np, var_np


def bn_apply(floating[:, :, :, ::1] x, floating[::1] mean, floating[::1] invstd,
             floating[::1] gamma, floating[::1] beta):
    """y = gamma * (x - mean) * invstd + beta, fused per channel."""
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], HW = x.shape[2] * x.shape[3]
    out_np = _empty(<floating>0, (B, x.shape[1], x.shape[2], x.shape[3]))
    cdef floating[:, :, :, ::1] out = out_np
    cdef Py_ssize_t b, c, i
    cdef floating a, t
    cdef floating *row
    cdef floating *orow
    with nogil:
        for c in range(C):
            a = gamma[c] * invstd[c]
            t = beta[c] - mean[c] * a
            for b in range(B):
                row = &x[b, c, 0, 0]
                orow = &out[b, c, 0, 0]
                for i in range(HW):
                    orow[i] = a * row[i] + t
    return out_np


def bn_backward(floating[:, :, :, ::1] x, floating[:, :, :, ::1] dy,
                floating[::1] mean, floating[::1] invstd, floating[::1] gamma):
    """Returns (dx, dgamma, dbeta) for train-mode batch normalization."""
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], HW = x.shape[2] * x.shape[3]
    dx_np = _empty(<floating>0, (B, x.shape[1], x.shape[2], x.shape[3]))
    dg_np = _empty(<floating>0, (C,))
    db_np = _empty(<floating>0, (C,))
    cdef floating[:, :, :, ::1] dx = dx_np
    cdef floating[::1] dgamma = dg_np
    cdef floating[::1] dbeta = db_np
    cdef Py_ssize_t b, c, i
    cdef double sg, sb, n
    cdef floating m, inv, xh, k1, k2, k3
    cdef floating *xrow
    cdef floating *grow
    cdef floating *drow
    n = <double>(B * HW)
    with nogil:
        for c in range(C):
            m = mean[c]
            inv = invstd[c]
            sg = 0
            sb = 0
            for b in range(B):
                xrow = &x[b, c, 0, 0]
                grow = &dy[b, c, 0, 0]
                for i in range(HW):
                    sg += grow[i] * ((xrow[i] - m) * inv)
                    sb += grow[i]
            dgamma[c] = <floating>sg
            dbeta[c] = <floating>sb
            k1 = gamma[c] * inv
            k2 = <floating>(sg / n)
            k3 = <floating>(sb / n)
            for b in range(B):
                xrow = &x[b, c, 0, 0]
                grow = &dy[b, c, 0, 0]
                drow = &dx[b, c, 0, 0]
                for i in range(HW):
                    xh = (xrow[i] - m) * inv
                    drow[i] = k1 * (grow[i] - k3 - xh * k2)
    return dx_np, dg_np, db_np
