"""Finite-difference validation of every backward rule.

Each check builds a scalar loss from float64 parameters positioned away
from non-differentiable points (relu kinks) and compares the tape
gradient against central differences. Used by the gradcheck CLI command
and the acceptance suite.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .losses import cross_entropy, kl_divergence, mse_feature, stablekd_loss, vanilla_kd_loss
from .network import build_network, init_params
from .partition import make_partition
from .rng import generator
from .tensor import Parameter, Tensor, finite_diff_check
from .toys import mlp_specs

TOLERANCE = 1e-5
EPS = 1e-6


def _param(rng, shape, pid, margin: float = 0.05) -> Parameter:
    """float64 values bounded away from zero so relu kinks stay out of reach."""
    mag = rng.uniform(margin + 0.05, 1.0, size=shape)
    sign = np.where(rng.uniform(size=shape) < 0.5, -1.0, 1.0)
    return Parameter((mag * sign).astype(np.float64), pid)


def _labels(rng, n, classes):
    return rng.integers(0, classes, size=n)


def check_matmul(seed: int) -> float:
    rng = generator(seed, 1)
    a = _param(rng, (3, 4), "a")
    b = _param(rng, (4, 2), "b")
    return finite_diff_check(lambda: T.sum_all(T.matmul(a, b)), [a, b], EPS)


def check_affine(seed: int) -> float:
    rng = generator(seed, 2)
    x = _param(rng, (3, 5), "x")
    w = _param(rng, (5, 4), "w")
    b = _param(rng, (4,), "b")
    return finite_diff_check(lambda: T.sum_all(T.mul(T.affine(x, w, b), T.affine(x, w, b))), [x, w, b], EPS)


def check_relu(seed: int) -> float:
    rng = generator(seed, 3)
    x = _param(rng, (4, 6), "x")
    return finite_diff_check(lambda: T.sum_all(T.relu(x)), [x], EPS)


def check_conv2d(seed: int) -> float:
    rng = generator(seed, 4)
    x = _param(rng, (2, 3, 6, 6), "x")
    k = _param(rng, (4, 3, 3, 3), "k")
    b = _param(rng, (4,), "b")
    return finite_diff_check(
        lambda: T.sum_all(T.mul(T.channel_bias(T.conv2d(x, k, stride=1, padding=1), b),
                                T.channel_bias(T.conv2d(x, k, stride=1, padding=1), b))),
        [x, k, b], EPS)


def check_conv2d_strided(seed: int) -> float:
    rng = generator(seed, 5)
    x = _param(rng, (2, 2, 8, 8), "x")
    k = _param(rng, (3, 2, 2, 2), "k")
    return finite_diff_check(lambda: T.sum_all(T.conv2d(x, k, stride=2, padding=0)), [x, k], EPS)


def check_avgpool2d(seed: int) -> float:
    rng = generator(seed, 6)
    x = _param(rng, (2, 3, 4, 4), "x")
    return finite_diff_check(lambda: T.sum_all(T.mul(T.avgpool2d(x, 2), T.avgpool2d(x, 2))), [x], EPS)


def check_flatten(seed: int) -> float:
    rng = generator(seed, 7)
    x = _param(rng, (2, 3, 2, 2), "x")
    return finite_diff_check(lambda: T.sum_all(T.mul(T.flatten(x), T.flatten(x))), [x], EPS)


def check_arithmetic(seed: int) -> float:
    rng = generator(seed, 8)
    a = _param(rng, (3, 3), "a")
    b = _param(rng, (3, 3), "b")

    def f():
        return T.sum_all(T.add(T.mul(a, b), T.scale(T.sub(a, b), 0.7)))

    return finite_diff_check(f, [a, b], EPS)


def check_mse(seed: int) -> float:
    rng = generator(seed, 9)
    a = _param(rng, (2, 3, 4), "a")
    b = _param(rng, (2, 3, 4), "b")
    return finite_diff_check(lambda: mse_feature(a, b), [a, b], EPS)


def check_cross_entropy(seed: int) -> float:
    rng = generator(seed, 10)
    logits = _param(rng, (6, 4), "logits")
    y = _labels(rng, 6, 4)
    return finite_diff_check(lambda: cross_entropy(logits, y), [logits], EPS)


def check_kl(seed: int) -> float:
    rng = generator(seed, 11)
    s = _param(rng, (5, 3), "s")
    t = _param(rng, (5, 3), "t")
    return finite_diff_check(lambda: kl_divergence(s, t, temperature=2.0), [s, t], EPS)


def check_vanilla_kd(seed: int) -> float:
    rng = generator(seed, 12)
    s = _param(rng, (4, 3), "s")
    t = _param(rng, (4, 3), "t")
    y = _labels(rng, 4, 3)
    return finite_diff_check(lambda: vanilla_kd_loss(s, t, y, alpha=0.3), [s, t], EPS)


def check_mlp_ce(seed: int) -> float:
    """Randomly initialized 2-layer network under CE loss."""
    net = build_network(mlp_specs(hidden=(6,), classes=3), (4,), 3, dtype=np.float64)
    init_params(net, seed)
    rng = generator(seed, 13)
    x = Tensor(rng.uniform(-1.0, 1.0, size=(5, 4)))
    y = _labels(rng, 5, 3)
    params = list(net.params.values())
    return finite_diff_check(lambda: cross_entropy(net.forward(x), y), params, EPS)


def check_stablekd_total(seed: int) -> float:
    """Full blockwise aggregate on a tiny MLP pair, gradients to the student."""
    teacher = build_network(mlp_specs(hidden=(6, 8), classes=3), (4,), 3, dtype=np.float64)
    init_params(teacher, seed + 1000)
    teacher.freeze()
    student = build_network(mlp_specs(hidden=(6, 8), classes=3), (4,), 3, dtype=np.float64)
    init_params(student, seed)
    part = make_partition(teacher, 3)
    rng = generator(seed, 14)
    x = rng.uniform(-1.0, 1.0, size=(5, 4))
    y = _labels(rng, 5, 3)
    params = list(student.params.values())
    return finite_diff_check(
        lambda: stablekd_loss(x, y, teacher, student, part, lam=0.8).total, params, EPS)


ALL_CHECKS = {
    "matmul": check_matmul,
    "affine": check_affine,
    "relu": check_relu,
    "conv2d": check_conv2d,
    "conv2d_strided": check_conv2d_strided,
    "avgpool2d": check_avgpool2d,
    "flatten": check_flatten,
    "arithmetic": check_arithmetic,
    "mse": check_mse,
    "cross_entropy": check_cross_entropy,
    "kl_divergence": check_kl,
    "vanilla_kd": check_vanilla_kd,
    "mlp_ce": check_mlp_ce,
    "stablekd_total": check_stablekd_total,
}


def run_gradcheck(seeds: int = 10, tolerance: float = TOLERANCE) -> dict[str, float]:
    """Worst relative error per op over the requested number of seeds."""
    report = {}
    for name, fn in ALL_CHECKS.items():
        report[name] = max(fn(seed) for seed in range(seeds))
    return report
