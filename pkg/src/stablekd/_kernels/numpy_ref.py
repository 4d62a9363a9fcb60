"""Reference kernels built on numpy (im2col convolution).

This backend is always importable. Accumulation order inside each kernel
is fixed by the loop/reduction structure, so repeated calls on identical
inputs are bit-identical. Results may differ in the last ulp from the
compiled backend, which accumulates in a different order.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, ho: int, wo: int) -> np.ndarray:
    # xp is the already-padded input (n, c, hp, wp)
    n, c = xp.shape[:2]
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]          # (n, c, ho, wo, kh, kw)
    cols = windows.transpose(0, 1, 4, 5, 2, 3)           # (n, c, kh, kw, ho, wo)
    return np.ascontiguousarray(cols).reshape(n, c * kh * kw, ho * wo)


def conv2d_forward(x, w, stride, padding):
    n, c, h, wd = x.shape
    f, _, kh, kw = w.shape
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (wd + 2 * padding - kw) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    cols = _im2col(xp, kh, kw, stride, ho, wo)
    out = np.matmul(w.reshape(f, -1), cols)              # (n, f, ho*wo)
    return out.reshape(n, f, ho, wo)


def conv2d_backward_input(dout, w, x_shape, stride, padding):
    n, c, h, wd = x_shape
    f, _, kh, kw = w.shape
    _, _, ho, wo = dout.shape
    g = dout.reshape(n, f, ho * wo)
    dcols = np.matmul(w.reshape(f, -1).T, g)             # (n, c*kh*kw, ho*wo)
    dcols = dcols.reshape(n, c, kh, kw, ho, wo)
    hp, wp = h + 2 * padding, wd + 2 * padding
    dxp = np.zeros((n, c, hp, wp), dtype=dout.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += dcols[:, :, i, j]
    if padding:
        return np.ascontiguousarray(dxp[:, :, padding : padding + h, padding : padding + wd])
    return dxp


def conv2d_backward_kernel(dout, x, w_shape, stride, padding):
    f, c, kh, kw = w_shape
    n = x.shape[0]
    _, _, ho, wo = dout.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    cols = _im2col(xp, kh, kw, stride, ho, wo)           # (n, c*kh*kw, ho*wo)
    g = dout.reshape(n, f, ho * wo)
    dw = np.matmul(g, cols.transpose(0, 2, 1)).sum(axis=0)
    return dw.reshape(f, c, kh, kw)


def avgpool2d_forward(x, window):
    n, c, h, w = x.shape
    v = x.reshape(n, c, h // window, window, w // window, window)
    return v.mean(axis=(3, 5))


def avgpool2d_backward(dout, window):
    n, c, ho, wo = dout.shape
    scaled = dout / (window * window)
    g = np.broadcast_to(scaled[:, :, :, None, :, None], (n, c, ho, window, wo, window))
    return np.ascontiguousarray(g).reshape(n, c, ho * window, wo * window)
