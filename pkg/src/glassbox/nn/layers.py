"""Layer-level numerics: im2col convolution, pooling with argmax capture, relu, fc.

All batched arrays are channels-first (N, C, H, W), float32. Conv weights are
(out_maps, in_maps, k, k). Max-pool argmax indices are flat offsets into the
pool layer's own input tensor (c*H*W + r*W + col), ties resolved to the lowest
offset; these offsets drive unpooling during back-projection.
"""

import numpy as np


def im2col(x, k, stride, pad):
    """Unfold (N, C, H, W) into (N, C*k*k, out_h*out_w) patch columns."""
    N, C, H, W = x.shape
    out_h = (H + 2 * pad - k) // stride + 1
    out_w = (W + 2 * pad - k) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = np.empty((N, C, k, k, out_h, out_w), dtype=x.dtype)
    for i in range(k):
        i_end = i + stride * out_h
        for j in range(k):
            j_end = j + stride * out_w
            cols[:, :, i, j, :, :] = xp[:, :, i:i_end:stride, j:j_end:stride]
    return cols.reshape(N, C * k * k, out_h * out_w), out_h, out_w


def col2im(cols, x_shape, k, stride, pad):
    """Fold patch columns back, accumulating overlaps (adjoint of im2col)."""
    N, C, H, W = x_shape
    out_h = (H + 2 * pad - k) // stride + 1
    out_w = (W + 2 * pad - k) // stride + 1
    cols = cols.reshape(N, C, k, k, out_h, out_w)
    xp = np.zeros((N, C, H + 2 * pad, W + 2 * pad), dtype=cols.dtype)
    for i in range(k):
        i_end = i + stride * out_h
        for j in range(k):
            j_end = j + stride * out_w
            xp[:, :, i:i_end:stride, j:j_end:stride] += cols[:, :, i, j, :, :]
    if pad:
        return xp[:, :, pad : H + pad, pad : W + pad]
    return xp


def conv_forward(x, w, b, stride, pad):
    """Returns (out, cache). out is (N, out_maps, out_h, out_w)."""
    out_maps, in_maps, k, _ = w.shape
    cols, out_h, out_w = im2col(x, k, stride, pad)
    wm = w.reshape(out_maps, -1)
    out = np.matmul(wm, cols) + b[:, None]
    out = out.reshape(x.shape[0], out_maps, out_h, out_w)
    cache = (x.shape, cols, wm, w.shape, stride, pad)
    return out, cache


def conv_backward(dout, cache):
    x_shape, cols, wm, w_shape, stride, pad = cache
    out_maps, in_maps, k, _ = w_shape
    N = x_shape[0]
    d2 = dout.reshape(N, out_maps, -1)
    db = d2.sum(axis=(0, 2))
    dw = np.matmul(d2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w_shape)
    dcols = np.matmul(wm.T, d2)
    dx = col2im(dcols, x_shape, k, stride, pad)
    return dx, dw, db


def conv_input_grad(dout, w, x_shape, stride, pad):
    """Gradient w.r.t. the conv input only (transposed convolution with w)."""
    out_maps = w.shape[0]
    k = w.shape[2]
    N = dout.shape[0]
    wm = w.reshape(out_maps, -1)
    dcols = np.matmul(wm.T, dout.reshape(N, out_maps, -1))
    return col2im(dcols, x_shape, k, stride, pad)


def relu_forward(x):
    return np.maximum(x, 0.0)


def relu_backward(dout, pre_activation):
    return dout * (pre_activation > 0)


def maxpool_forward(x, window, stride):
    """Returns (out, argmax). argmax holds flat offsets into x's per-sample
    (C*H*W) layout; scanning window positions in offset order with a strict
    comparison makes ties resolve to the lowest offset."""
    N, C, H, W = x.shape
    out_h = (H - window) // stride + 1
    out_w = (W - window) // stride + 1
    out = np.full((N, C, out_h, out_w), -np.inf, dtype=x.dtype)
    arg = np.zeros((N, C, out_h, out_w), dtype=np.int64)
    rows = (np.arange(out_h) * stride)[:, None]
    cols_ = (np.arange(out_w) * stride)[None, :]
    chan = (np.arange(C) * (H * W))[:, None, None]
    for di in range(window):
        for dj in range(window):
            vals = x[
                :, :, di : di + (out_h - 1) * stride + 1 : stride,
                dj : dj + (out_w - 1) * stride + 1 : stride,
            ]
            off = chan + (rows + di) * W + (cols_ + dj)
            better = vals > out
            out = np.where(better, vals, out)
            arg = np.where(better, off[None], arg)
    return out, arg


def maxpool_backward(dout, arg, x_shape):
    """Scatter-add gradients to the recorded argmax offsets (unpooling)."""
    N = x_shape[0]
    flat_len = int(np.prod(x_shape[1:]))
    dx = np.zeros((N, flat_len), dtype=dout.dtype)
    np.add.at(dx, (np.arange(N)[:, None], arg.reshape(N, -1)), dout.reshape(N, -1))
    return dx.reshape(x_shape)


def global_maxpool_forward(x):
    """(N, C, H, W) -> (N, C) spatial maxima, plus flat spatial argmax."""
    N, C = x.shape[:2]
    flat = x.reshape(N, C, -1)
    arg = flat.argmax(axis=2)
    out = np.take_along_axis(flat, arg[:, :, None], axis=2)[:, :, 0]
    return out, arg


def global_maxpool_backward(dout, arg, x_shape):
    N, C = x_shape[:2]
    dx = np.zeros((N, C, int(np.prod(x_shape[2:]))), dtype=dout.dtype)
    np.put_along_axis(dx, arg[:, :, None], dout[:, :, None], axis=2)
    return dx.reshape(x_shape)


def fc_forward(x, w, b):
    return x @ w.T + b


def fc_backward(dout, x, w):
    dw = dout.T @ x
    db = dout.sum(axis=0)
    dx = dout @ w
    return dx, dw, db


def softmax(logits):
    """Numerically stable softmax along the last axis (max-subtraction)."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy loss and gradient w.r.t. logits."""
    n = logits.shape[0]
    p = softmax(logits)
    loss = -np.mean(np.log(p[np.arange(n), labels] + 1e-300))
    grad = p.astype(np.float32)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad
