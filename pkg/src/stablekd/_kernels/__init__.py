"""Kernel backend selection.

The compiled extension handles the convolution/pooling inner loops when
it has been built; otherwise the numpy reference backend is used. Set
SKD_KERNELS=numpy or SKD_KERNELS=cython to force a backend (forcing
cython raises if the extension is missing). Both backends are
deterministic in isolation but are not bit-identical to each other.
"""

from __future__ import annotations

import os

import numpy as np

from . import numpy_ref

_choice = os.environ.get("SKD_KERNELS", "auto")
if _choice not in ("auto", "numpy", "cython"):
    raise ImportError(f"SKD_KERNELS must be auto, numpy, or cython, got {_choice!r}")

if _choice == "numpy":
    _impl = numpy_ref
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        if _choice == "cython":
            raise
        _impl = numpy_ref

BACKEND: str = _impl.NAME


def _c(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a)


def conv2d_forward(x, w, stride, padding):
    return _impl.conv2d_forward(_c(x), _c(w), stride, padding)


def conv2d_backward_input(dout, w, x_shape, stride, padding):
    return _impl.conv2d_backward_input(_c(dout), _c(w), tuple(x_shape), stride, padding)


def conv2d_backward_kernel(dout, x, w_shape, stride, padding):
    return _impl.conv2d_backward_kernel(_c(dout), _c(x), tuple(w_shape), stride, padding)


def avgpool2d_forward(x, window):
    return _impl.avgpool2d_forward(_c(x), window)


def avgpool2d_backward(dout, window):
    return _impl.avgpool2d_backward(_c(dout), window)
