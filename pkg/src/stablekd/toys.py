"""Desk-scale architectures used by the CLI presets and the test suite."""

from __future__ import annotations

import numpy as np

from .network import (
    LayerSpec,
    Network,
    affine_spec,
    build_network,
    conv_spec,
    flatten_spec,
    pool_spec,
    relu_spec,
)


def cnn_specs(widths: tuple[int, ...] = (8, 16, 24, 32), classes: int = 4) -> list[LayerSpec]:
    """Four width stages over an 8x8 single-channel image, plus the head.

    Width changes at each stage give make_partition enough split points
    for k up to len(widths) + 1.
    """
    w1, w2, w3, w4 = widths
    return [
        conv_spec(w1, 3, padding=1),
        relu_spec(),
        conv_spec(w2, 3, padding=1),
        relu_spec(),
        pool_spec(2),
        conv_spec(w3, 3, padding=1),
        relu_spec(),
        pool_spec(2),
        conv_spec(w4, 3, padding=1),
        relu_spec(),
        flatten_spec(),
        affine_spec(classes),
    ]


def cnn(widths: tuple[int, ...] = (8, 16, 24, 32), classes: int = 4, side: int = 8,
        dtype=np.float32) -> Network:
    return build_network(cnn_specs(widths, classes), (1, side, side), classes, dtype=dtype)


def backbone_small_specs(classes: int = 4) -> list[LayerSpec]:
    """Two-stage feature extractor ending in a 64-wide head input."""
    return [
        conv_spec(8, 3, padding=1),
        relu_spec(),
        pool_spec(2),
        conv_spec(16, 3, padding=1),
        relu_spec(),
        pool_spec(2),
        flatten_spec(),
        affine_spec(classes),
    ]


def backbone_large_specs(classes: int = 4) -> list[LayerSpec]:
    """Deeper extractor with the same 64-wide head input as the small one."""
    return [
        conv_spec(8, 3, padding=1),
        relu_spec(),
        conv_spec(8, 3, padding=1),
        relu_spec(),
        pool_spec(2),
        conv_spec(16, 3, padding=1),
        relu_spec(),
        conv_spec(16, 3, padding=1),
        relu_spec(),
        pool_spec(2),
        flatten_spec(),
        affine_spec(classes),
    ]


def mlp_specs(hidden: tuple[int, ...] = (16, 16), classes: int = 3) -> list[LayerSpec]:
    specs: list[LayerSpec] = []
    for h in hidden:
        specs.append(affine_spec(h))
        specs.append(relu_spec())
    specs.append(affine_spec(classes))
    return specs


def mlp(inputs: int = 2, hidden: tuple[int, ...] = (16, 16), classes: int = 3,
        dtype=np.float32) -> Network:
    return build_network(mlp_specs(hidden, classes), (inputs,), classes, dtype=dtype)
