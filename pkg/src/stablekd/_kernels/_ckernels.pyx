# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled convolution/pooling kernels.

Single-threaded direct loops with a fixed accumulation order, so results
are reproducible bit for bit. Supports float32 and float64 via fused types.
"""

import numpy as np

ctypedef fused floating:
    float
    double

NAME = "cython"


def conv2d_forward(floating[:, :, :, ::1] x, floating[:, :, :, ::1] w, int stride, int padding):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t f = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ho = (h + 2 * padding - kh) // stride + 1
    cdef Py_ssize_t wo = (wd + 2 * padding - kw) // stride + 1
    if floating is float:
        out_arr = np.zeros((n, f, ho, wo), dtype=np.float32)
    else:
        out_arr = np.zeros((n, f, ho, wo), dtype=np.float64)
    cdef floating[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, of, oy, ox, ic, ky, kx, iy, ix
    cdef floating acc
    with nogil:
        for b in range(n):
            for of in range(f):
                for oy in range(ho):
                    for ox in range(wo):
                        acc = 0
                        for ic in range(c):
                            for ky in range(kh):
                                iy = oy * stride + ky - padding
                                if iy < 0 or iy >= h:
                                    continue
                                for kx in range(kw):
                                    ix = ox * stride + kx - padding
                                    if ix < 0 or ix >= wd:
                                        continue
                                    acc = acc + x[b, ic, iy, ix] * w[of, ic, ky, kx]
                        out[b, of, oy, ox] = acc
    return out_arr


def conv2d_backward_input(floating[:, :, :, ::1] dout, floating[:, :, :, ::1] w,
                          x_shape, int stride, int padding):
    cdef Py_ssize_t n = x_shape[0], c = x_shape[1], h = x_shape[2], wd = x_shape[3]
    cdef Py_ssize_t f = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ho = dout.shape[2], wo = dout.shape[3]
    if floating is float:
        dx_arr = np.zeros((n, c, h, wd), dtype=np.float32)
    else:
        dx_arr = np.zeros((n, c, h, wd), dtype=np.float64)
    cdef floating[:, :, :, ::1] dx = dx_arr
    cdef Py_ssize_t b, of, oy, ox, ic, ky, kx, iy, ix
    cdef floating g
    with nogil:
        for b in range(n):
            for of in range(f):
                for oy in range(ho):
                    for ox in range(wo):
                        g = dout[b, of, oy, ox]
                        for ic in range(c):
                            for ky in range(kh):
                                iy = oy * stride + ky - padding
                                if iy < 0 or iy >= h:
                                    continue
                                for kx in range(kw):
                                    ix = ox * stride + kx - padding
                                    if ix < 0 or ix >= wd:
                                        continue
                                    dx[b, ic, iy, ix] = dx[b, ic, iy, ix] + g * w[of, ic, ky, kx]
    return dx_arr


def conv2d_backward_kernel(floating[:, :, :, ::1] dout, floating[:, :, :, ::1] x,
                           w_shape, int stride, int padding):
    cdef Py_ssize_t f = w_shape[0], c = w_shape[1], kh = w_shape[2], kw = w_shape[3]
    cdef Py_ssize_t n = x.shape[0], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t ho = dout.shape[2], wo = dout.shape[3]
    if floating is float:
        dw_arr = np.zeros((f, c, kh, kw), dtype=np.float32)
    else:
        dw_arr = np.zeros((f, c, kh, kw), dtype=np.float64)
    cdef floating[:, :, :, ::1] dw = dw_arr
    cdef Py_ssize_t b, of, oy, ox, ic, ky, kx, iy, ix
    cdef floating g
    with nogil:
        for b in range(n):
            for of in range(f):
                for oy in range(ho):
                    for ox in range(wo):
                        g = dout[b, of, oy, ox]
                        for ic in range(c):
                            for ky in range(kh):
                                iy = oy * stride + ky - padding
                                if iy < 0 or iy >= h:
                                    continue
                                for kx in range(kw):
                                    ix = ox * stride + kx - padding
                                    if ix < 0 or ix >= wd:
                                        continue
                                    dw[of, ic, ky, kx] = dw[of, ic, ky, kx] + g * x[b, ic, iy, ix]
    return dw_arr


def avgpool2d_forward(floating[:, :, :, ::1] x, int window):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t ho = h // window, wo = w // window
    if floating is float:
        out_arr = np.zeros((n, c, ho, wo), dtype=np.float32)
    else:
        out_arr = np.zeros((n, c, ho, wo), dtype=np.float64)
    cdef floating[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, ic, oy, ox, ky, kx
    cdef floating acc, inv = <floating>1.0 / (window * window)
    with nogil:
        for b in range(n):
            for ic in range(c):
                for oy in range(ho):
                    for ox in range(wo):
                        acc = 0
                        for ky in range(window):
                            for kx in range(window):
                                acc = acc + x[b, ic, oy * window + ky, ox * window + kx]
                        out[b, ic, oy, ox] = acc * inv
    return out_arr


def avgpool2d_backward(floating[:, :, :, ::1] dout, int window):
    cdef Py_ssize_t n = dout.shape[0], c = dout.shape[1], ho = dout.shape[2], wo = dout.shape[3]
    if floating is float:
        dx_arr = np.zeros((n, c, ho * window, wo * window), dtype=np.float32)
    else:
        dx_arr = np.zeros((n, c, ho * window, wo * window), dtype=np.float64)
    cdef floating[:, :, :, ::1] dx = dx_arr
    cdef Py_ssize_t b, ic, oy, ox, ky, kx
    cdef floating g, inv = <floating>1.0 / (window * window)
    with nogil:
        for b in range(n):
            for ic in range(c):
                for oy in range(ho):
                    for ox in range(wo):
                        g = dout[b, ic, oy, ox] * inv
                        for ky in range(window):
                            for kx in range(window):
                                dx[b, ic, oy * window + ky, ox * window + kx] = g
    return dx_arr
